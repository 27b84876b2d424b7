#pragma once

// Umbrella header for the medication-recommendation library.

#include "mmm/common.hpp"
#include "mmm/rng.hpp"
#include "mmm/registry.hpp"
#include "mmm/corpus.hpp"
#include "mmm/split.hpp"
#include "mmm/synth.hpp"
#include "mmm/elf.hpp"
#include "mmm/params.hpp"
#include "mmm/patient_encoder.hpp"
#include "mmm/cnn.hpp"
#include "mmm/elf_drug_encoder.hpp"
#include "mmm/bipartite.hpp"
#include "mmm/objective.hpp"
#include "mmm/model.hpp"
#include "mmm/features.hpp"
#include "mmm/stats.hpp"
#include "mmm/evaluator.hpp"
#include "mmm/trainer.hpp"
