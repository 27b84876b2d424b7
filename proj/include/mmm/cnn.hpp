#pragma once

#include "mmm/params.hpp"

#include <vector>

namespace mmm {

using ChannelStack = std::vector<Mat>;  // one H x W map per channel

namespace cnn {

// 3x3 same-padding convolution. Kernel row o holds the 3x3 weights for
// every input channel, laid out c*9 + (ky*3 + kx).
inline ChannelStack conv3x3(const ChannelStack& in, const Mat& kernel, const Vec& bias) {
    auto rows = in[0].rows(), cols = in[0].cols();
    int out_ch = static_cast<int>(kernel.rows());
    int in_ch = static_cast<int>(in.size());
    ChannelStack out(static_cast<std::size_t>(out_ch));
    for (int o = 0; o < out_ch; ++o) {
        Mat acc = Mat::Constant(rows, cols, bias(o));
        for (int c = 0; c < in_ch; ++c) {
            const Mat& src = in[static_cast<std::size_t>(c)];
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    double w = kernel(o, c * 9 + ky * 3 + kx);
                    if (w == 0.0) continue;
                    int dy = ky - 1, dx = kx - 1;
                    auto y0 = std::max<Eigen::Index>(0, -dy), y1 = std::min(rows, rows - dy);
                    auto x0 = std::max<Eigen::Index>(0, -dx), x1 = std::min(cols, cols - dx);
                    acc.block(y0, x0, y1 - y0, x1 - x0) +=
                        w * src.block(y0 + dy, x0 + dx, y1 - y0, x1 - x0);
                }
        }
        out[static_cast<std::size_t>(o)] = std::move(acc);
    }
    return out;
}

inline void conv3x3_backward(const ChannelStack& in, const Mat& kernel, const ChannelStack& dout,
                             ChannelStack& din, Mat& dkernel, Vec& dbias) {
    auto rows = in[0].rows(), cols = in[0].cols();
    int out_ch = static_cast<int>(kernel.rows());
    int in_ch = static_cast<int>(in.size());
    for (int o = 0; o < out_ch; ++o) {
        const Mat& g = dout[static_cast<std::size_t>(o)];
        dbias(o) += g.sum();
        for (int c = 0; c < in_ch; ++c) {
            const Mat& src = in[static_cast<std::size_t>(c)];
            Mat& dsrc = din[static_cast<std::size_t>(c)];
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    int dy = ky - 1, dx = kx - 1;
                    auto y0 = std::max<Eigen::Index>(0, -dy), y1 = std::min(rows, rows - dy);
                    auto x0 = std::max<Eigen::Index>(0, -dx), x1 = std::min(cols, cols - dx);
                    auto gblk = g.block(y0, x0, y1 - y0, x1 - x0);
                    dkernel(o, c * 9 + ky * 3 + kx) +=
                        (src.block(y0 + dy, x0 + dx, y1 - y0, x1 - x0).cwiseProduct(gblk)).sum();
                    dsrc.block(y0 + dy, x0 + dx, y1 - y0, x1 - x0) +=
                        kernel(o, c * 9 + ky * 3 + kx) * gblk;
                }
        }
    }
}

inline ChannelStack relu(const ChannelStack& in) {
    ChannelStack out(in.size());
    for (std::size_t c = 0; c < in.size(); ++c) out[c] = in[c].cwiseMax(0.0);
    return out;
}

// 2x2 max-pool with stride 2; odd borders keep a clipped window. argmax
// stores the flat index (y * cols + x) of each window winner.
inline ChannelStack maxpool2(const ChannelStack& in, std::vector<Eigen::MatrixXi>& argmax) {
    ChannelStack out(in.size());
    argmax.resize(in.size());
    for (std::size_t c = 0; c < in.size(); ++c) {
        const Mat& src = in[c];
        auto oh = (src.rows() + 1) / 2, ow = (src.cols() + 1) / 2;
        out[c] = Mat(oh, ow);
        argmax[c].resize(oh, ow);
        for (Eigen::Index y = 0; y < oh; ++y)
            for (Eigen::Index x = 0; x < ow; ++x) {
                double best = -std::numeric_limits<double>::infinity();
                Eigen::Index best_idx = 0;
                for (Eigen::Index yy = 2 * y; yy < std::min(src.rows(), 2 * y + 2); ++yy)
                    for (Eigen::Index xx = 2 * x; xx < std::min(src.cols(), 2 * x + 2); ++xx)
                        if (src(yy, xx) > best) {
                            best = src(yy, xx);
                            best_idx = yy * src.cols() + xx;
                        }
                out[c](y, x) = best;
                argmax[c](y, x) = static_cast<int>(best_idx);
            }
    }
    return out;
}

inline ChannelStack maxpool2_backward(const ChannelStack& in, const ChannelStack& dout,
                                      const std::vector<Eigen::MatrixXi>& argmax) {
    ChannelStack din(in.size());
    for (std::size_t c = 0; c < in.size(); ++c) {
        din[c] = Mat::Zero(in[c].rows(), in[c].cols());
        for (Eigen::Index y = 0; y < dout[c].rows(); ++y)
            for (Eigen::Index x = 0; x < dout[c].cols(); ++x) {
                Eigen::Index idx = argmax[c](y, x);
                din[c](idx / in[c].cols(), idx % in[c].cols()) += dout[c](y, x);
            }
    }
    return din;
}

inline Vec flatten(const ChannelStack& in) {
    auto per = in[0].size();
    Vec out(static_cast<Eigen::Index>(in.size()) * per);
    for (std::size_t c = 0; c < in.size(); ++c)
        out.segment(static_cast<Eigen::Index>(c) * per, per) =
            Eigen::Map<const Vec>(in[c].data(), per);
    return out;
}

inline ChannelStack unflatten(const Vec& v, Eigen::Index rows, Eigen::Index cols, std::size_t ch) {
    ChannelStack out(ch);
    for (std::size_t c = 0; c < ch; ++c)
        out[c] = Eigen::Map<const Mat>(v.data() + static_cast<Eigen::Index>(c) * rows * cols, rows,
                                       cols);
    return out;
}

}  // namespace cnn

struct CnnCache {
    ChannelStack input;             // single channel
    ChannelStack pre1, act1, pool1; // after conv1 / relu / pool
    std::vector<Eigen::MatrixXi> arg1;
    ChannelStack pre2, act2, pool2;
    std::vector<Eigen::MatrixXi> arg2;
    Vec flat;
};

// Patch -> feature vector. Cache capture is optional so the bulk forward
// scan over all patches stays cheap; backward recomputes with a cache.
inline Vec cnn_forward(const Mat& patch, const CnnParams& p, CnnCache* cache) {
    ChannelStack input{patch};
    ChannelStack pre1 = cnn::conv3x3(input, p.conv1_k, p.conv1_b);
    ChannelStack act1 = cnn::relu(pre1);
    std::vector<Eigen::MatrixXi> arg1;
    ChannelStack pool1 = cnn::maxpool2(act1, arg1);
    ChannelStack pre2 = cnn::conv3x3(pool1, p.conv2_k, p.conv2_b);
    ChannelStack act2 = cnn::relu(pre2);
    std::vector<Eigen::MatrixXi> arg2;
    ChannelStack pool2 = cnn::maxpool2(act2, arg2);
    Vec flat = cnn::flatten(pool2);
    Vec out = p.head_W * flat + p.head_b;
    if (cache)
        *cache = {std::move(input), std::move(pre1),  std::move(act1), std::move(pool1),
                  std::move(arg1),  std::move(pre2),  std::move(act2), std::move(pool2),
                  std::move(arg2),  std::move(flat)};
    return out;
}

inline void cnn_backward(const CnnParams& p, const CnnCache& c, const Vec& dout, CnnParams& g) {
    g.head_W += dout * c.flat.transpose();
    g.head_b += dout;
    Vec dflat = p.head_W.transpose() * dout;
    ChannelStack dpool2 =
        cnn::unflatten(dflat, c.pool2[0].rows(), c.pool2[0].cols(), c.pool2.size());
    ChannelStack dact2 = cnn::maxpool2_backward(c.act2, dpool2, c.arg2);
    for (std::size_t ch = 0; ch < dact2.size(); ++ch)
        dact2[ch] = dact2[ch].cwiseProduct((c.pre2[ch].array() > 0.0).cast<double>().matrix());
    ChannelStack dpool1(c.pool1.size());
    for (std::size_t ch = 0; ch < dpool1.size(); ++ch)
        dpool1[ch] = Mat::Zero(c.pool1[0].rows(), c.pool1[0].cols());
    cnn::conv3x3_backward(c.pool1, p.conv2_k, dact2, dpool1, g.conv2_k, g.conv2_b);
    ChannelStack dact1 = cnn::maxpool2_backward(c.act1, dpool1, c.arg1);
    for (std::size_t ch = 0; ch < dact1.size(); ++ch)
        dact1[ch] = dact1[ch].cwiseProduct((c.pre1[ch].array() > 0.0).cast<double>().matrix());
    ChannelStack dinput{Mat::Zero(c.input[0].rows(), c.input[0].cols())};
    cnn::conv3x3_backward(c.input, p.conv1_k, dact1, dinput, g.conv1_k, g.conv1_b);
}

}  // namespace mmm
