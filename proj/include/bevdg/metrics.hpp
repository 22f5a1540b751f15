#pragma once

#include <array>

#include "bevdg/image.hpp"
#include "bevdg/model.hpp"

namespace bevdg {

struct IoUReport {
    std::array<double, 3> per_class{}; // vehicle, road, lane
    double average = 0.0;              // arithmetic mean of per_class
    double threshold = 0.5;
};

// Per-class intersection-over-union of the thresholded prediction, then the
// class mean. A class empty in both prediction and label counts as 1;
// a nonempty union with empty intersection counts as 0.
IoUReport iou(const Tensor& pred, const SegMask& label, double threshold = 0.5);

} // namespace bevdg
