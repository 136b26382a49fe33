// SPDX-License-Identifier: Apache-2.0
//
// Model and checkpoint documents. One self-describing JSON file holds shapes,
// activation, weights, biases, masks and the hyper state; round-trips are
// lossless at double precision. A checkpoint is the same document plus the
// iteration counter, RNG state and history, so it loads anywhere a model does.

#pragma once

#include <string>

#include "sparsid/trainer.hpp"

namespace sparsid {

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);

std::string checkpoint_to_json(const Checkpoint& ck, int n_a, int n_b);
Checkpoint checkpoint_from_json(const std::string& text);

/// Accepts either document; a checkpoint loads as the model it contains.
TrainedModel load_model_file(const std::string& path);

void save_text_file(const std::string& path, const std::string& text);
std::string load_text_file(const std::string& path);

/// Write to <path>.tmp then rename, so readers never see a partial file.
void save_text_file_atomic(const std::string& path, const std::string& text);

}  // namespace sparsid
