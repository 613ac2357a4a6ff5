#include "fewshot/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace fewshot {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_curves_svg(const TrainingLog& log, const std::string& title) {
    constexpr double w = 640, h = 400, left = 60, right = 20, top = 40, bottom = 50;
    const double pw = w - left - right;
    const double ph = h - top - bottom;
    const int max_epoch = log.empty() ? 1 : std::max(1, log.back().epoch);

    auto px = [&](int epoch) { return left + pw * epoch / max_epoch; };
    auto py = [&](double acc) { return top + ph * (1.0 - std::clamp(acc, 0.0, 1.0)); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
       << escape(title) << "</text>\n";

    for (int i = 0; i <= 5; ++i) {
        const double acc = i / 5.0;
        os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << num(py(acc)) << "\" y2=\""
           << num(py(acc)) << "\" stroke=\"#ddd\"/>\n"
           << "<text x=\"" << left - 8 << "\" y=\"" << num(py(acc) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(acc) << "</text>\n";
    }
    const int tick = std::max(1, max_epoch / 10);
    for (int e = 0; e <= max_epoch; e += tick) {
        os << "<text x=\"" << num(px(e)) << "\" y=\"" << top + ph + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << e << "</text>\n";
    }
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n"
       << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">epoch</text>\n"
       << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
       << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">accuracy</text>\n";

    auto polyline = [&](auto field, const char* colour) {
        if (log.empty()) return;
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (const auto& r : log) os << num(px(r.epoch)) << ',' << num(py(field(r))) << ' ';
        os << "\"/>\n";
    };
    polyline([](const EpochRecord& r) { return r.train_acc; }, "#1f77b4");
    polyline([](const EpochRecord& r) { return r.val_acc; }, "#d62728");

    os << "<text x=\"" << left + 10 << "\" y=\"" << top + ph - 28
       << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f77b4\">train</text>\n"
       << "<text x=\"" << left + 10 << "\" y=\"" << top + ph - 12
       << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d62728\">validation</text>\n"
       << "</svg>\n";
    return os.str();
}

std::string curves_csv(const TrainingLog& log) {
    std::ostringstream os;
    os << "epoch,train_acc,val_acc,loss\n";
    char buf[128];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.epoch, r.train_acc, r.val_acc, r.loss);
        os << buf;
    }
    return os.str();
}

} // namespace fewshot
