#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sclab/data.hpp"
#include "sclab/nn.hpp"
#include "sclab/train.hpp"

namespace sclab::eval {

struct EvalReport {
    std::string model;     // architecture id
    std::string dataset;
    std::string shortcut;  // shortcut kind id
    double learning_rate = 0.0;
    uint64_t seed = 0;
    double acc_shortcut = 0.0;
    double acc_clean = 0.0;
    double acc_diff = 0.0;
    double loss_shortcut = 0.0;
    double loss_clean = 0.0;
    double loss_diff = 0.0;
};

// Accuracy and mean cross-entropy (nats) over a compute-domain split,
// evaluated in fixed-size batches. Argmax ties break to the lowest class.
template <class T>
std::pair<double, double> accuracy_and_loss(const nn::TrainedModel<T>& model,
                                            const data::BasicSplit<T>& split,
                                            int batch_size = 256) {
    data::validate(split);
    const int n = static_cast<int>(split.size());
    const int K = model.config.num_classes;
    long correct = 0;
    double loss_sum = 0.0;
    std::vector<int> idx;
    for (int start = 0; start < n; start += batch_size) {
        int bs = std::min(batch_size, n - start);
        idx.resize(static_cast<size_t>(bs));
        for (int i = 0; i < bs; ++i) idx[static_cast<size_t>(i)] = start + i;
        Tensor<T> logits = nn::forward(model, data::gather_batch(split, idx));
        for (int i = 0; i < bs; ++i) {
            const T* row = logits.data() + static_cast<long>(i) * K;
            int label = split.labels[static_cast<size_t>(start + i)];
            if (train::argmax_lowest_t(row, K) == label) ++correct;
            double m = static_cast<double>(row[0]);
            for (int j = 1; j < K; ++j) m = std::max(m, static_cast<double>(row[j]));
            double denom = 0.0;
            for (int j = 0; j < K; ++j) denom += std::exp(static_cast<double>(row[j]) - m);
            loss_sum += std::log(denom) + m - static_cast<double>(row[label]);
        }
    }
    return {static_cast<double>(correct) / n, loss_sum / n};
}

template <class T>
double accuracy(const nn::TrainedModel<T>& model, const data::BasicSplit<T>& split) {
    return accuracy_and_loss(model, split).first;
}

struct ReportMeta {
    std::string dataset;
    std::string shortcut;
    double learning_rate = 0.0;
    uint64_t seed = 0;
};

// Evaluate one model on the shortcut-bearing and clean variants of the same
// test set. The two splits must carry identical label sequences.
template <class T>
EvalReport dual_eval(const nn::TrainedModel<T>& model, const data::BasicSplit<T>& test_shortcut,
                     const data::BasicSplit<T>& test_clean, const ReportMeta& meta = {}) {
    if (test_shortcut.size() != test_clean.size())
        throw SplitMismatch("test splits differ in length");
    if (test_shortcut.labels != test_clean.labels)
        throw SplitMismatch("test splits differ in label sequence");
    EvalReport r;
    r.model = nn::to_string(model.config.arch);
    r.dataset = meta.dataset.empty() ? test_clean.name : meta.dataset;
    r.shortcut = meta.shortcut;
    r.learning_rate = meta.learning_rate;
    r.seed = meta.seed;
    auto [as, ls] = accuracy_and_loss(model, test_shortcut);
    auto [ac, lc] = accuracy_and_loss(model, test_clean);
    r.acc_shortcut = as;
    r.acc_clean = ac;
    r.loss_shortcut = ls;
    r.loss_clean = lc;
    r.acc_diff = std::fabs(as - ac);
    r.loss_diff = std::fabs(ls - lc);
    return r;
}

struct SummaryRow {
    std::map<std::string, std::string> group;  // key -> value, e.g. model -> cnn
    int count = 0;
    // metric -> (mean, population std)
    std::map<std::string, std::pair<double, double>> stats;
};

// Per-group mean and population standard deviation of every metric.
// group_keys may contain: model, dataset, shortcut, lr, seed.
std::vector<SummaryRow> aggregate(const std::vector<EvalReport>& reports,
                                  const std::vector<std::string>& group_keys);

// Fixed-schema CSV: model,dataset,shortcut,lr,seed,acc_shortcut,acc_clean,
// acc_diff,loss_shortcut,loss_clean,loss_diff. Values use shortest exact
// round-trip formatting, so rewriting the same reports is byte-identical.
extern const char* kReportCsvHeader;
std::string report_csv_row(const EvalReport& r);
void write_report_csv(const std::string& path, const std::vector<EvalReport>& reports);
std::vector<EvalReport> read_report_csv(const std::string& path);

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows,
                       const std::vector<std::string>& group_keys);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace sclab::eval
