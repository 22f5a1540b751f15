#include "bevdg/metrics.hpp"

namespace bevdg {

IoUReport iou(const Tensor& pred, const SegMask& label, double threshold) {
    if (pred.height != label.height() || pred.width != label.width() ||
        pred.channels != label.classes())
        throw InvalidArgument("iou: prediction/label dimensions disagree");

    IoUReport rep;
    rep.threshold = threshold;
    double sum = 0.0;
    for (int c = 0; c < pred.channels; ++c) {
        long long inter = 0, uni = 0;
        for (int y = 0; y < pred.height; ++y)
            for (int x = 0; x < pred.width; ++x) {
                bool p = pred.at(c, y, x) >= threshold;
                bool g = label.at(y, x, c) != 0;
                if (p && g) ++inter;
                if (p || g) ++uni;
            }
        double v = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        rep.per_class[c] = v;
        sum += v;
    }
    rep.average = sum / pred.channels;
    return rep;
}

} // namespace bevdg
