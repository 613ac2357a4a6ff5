#pragma once

#include <string>

#include "fewshot/training.hpp"

namespace fewshot {

/// Accuracy-vs-epoch chart (train and validation) as a standalone SVG document.
std::string render_curves_svg(const TrainingLog& log, const std::string& title);

/// `epoch,train_acc,val_acc,loss` rows.
std::string curves_csv(const TrainingLog& log);

} // namespace fewshot
