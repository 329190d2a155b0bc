#include "sclab/evaluate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sclab::eval {

const char* kReportCsvHeader =
    "model,dataset,shortcut,lr,seed,acc_shortcut,acc_clean,acc_diff,loss_shortcut,loss_clean,"
    "loss_diff";

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw DataError("bad numeric field '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string group_value(const EvalReport& r, const std::string& key) {
    if (key == "model") return r.model;
    if (key == "dataset") return r.dataset;
    if (key == "shortcut") return r.shortcut;
    if (key == "lr") return format_double(r.learning_rate);
    if (key == "seed") return std::to_string(r.seed);
    throw DataError("unknown group key '" + key + "'");
}

const std::vector<std::pair<std::string, double EvalReport::*>> kMetrics = {
    {"acc_shortcut", &EvalReport::acc_shortcut}, {"acc_clean", &EvalReport::acc_clean},
    {"acc_diff", &EvalReport::acc_diff},         {"loss_shortcut", &EvalReport::loss_shortcut},
    {"loss_clean", &EvalReport::loss_clean},     {"loss_diff", &EvalReport::loss_diff},
};

}  // namespace

std::vector<SummaryRow> aggregate(const std::vector<EvalReport>& reports,
                                  const std::vector<std::string>& group_keys) {
    if (reports.empty()) throw EmptyGroup("no reports to aggregate");
    std::map<std::vector<std::string>, std::vector<const EvalReport*>> groups;
    for (const auto& r : reports) {
        std::vector<std::string> key;
        for (const auto& k : group_keys) key.push_back(group_value(r, k));
        groups[key].push_back(&r);
    }
    std::vector<SummaryRow> rows;
    for (const auto& [key, members] : groups) {
        if (members.empty()) throw EmptyGroup("empty group");
        SummaryRow row;
        for (size_t i = 0; i < group_keys.size(); ++i) row.group[group_keys[i]] = key[i];
        row.count = static_cast<int>(members.size());
        for (const auto& [mname, mptr] : kMetrics) {
            double mean = 0.0;
            for (const auto* r : members) mean += r->*mptr;
            mean /= static_cast<double>(members.size());
            double var = 0.0;
            for (const auto* r : members) {
                double d = r->*mptr - mean;
                var += d * d;
            }
            var /= static_cast<double>(members.size());  // population convention
            row.stats[mname] = {mean, std::sqrt(var)};
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string report_csv_row(const EvalReport& r) {
    std::ostringstream os;
    os << r.model << ',' << r.dataset << ',' << r.shortcut << ',' << format_double(r.learning_rate)
       << ',' << r.seed << ',' << format_double(r.acc_shortcut) << ','
       << format_double(r.acc_clean) << ',' << format_double(r.acc_diff) << ','
       << format_double(r.loss_shortcut) << ',' << format_double(r.loss_clean) << ','
       << format_double(r.loss_diff);
    return os.str();
}

void write_report_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f << kReportCsvHeader << '\n';
    for (const auto& r : reports) f << report_csv_row(r) << '\n';
}

std::vector<EvalReport> read_report_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError(path + " is empty");
    std::vector<EvalReport> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() < 11) throw DataError("short CSV row in " + path);
        EvalReport r;
        r.model = fields[0];
        r.dataset = fields[1];
        r.shortcut = fields[2];
        r.learning_rate = parse_double(fields[3]);
        r.seed = static_cast<uint64_t>(std::stoull(fields[4]));
        r.acc_shortcut = parse_double(fields[5]);
        r.acc_clean = parse_double(fields[6]);
        r.acc_diff = parse_double(fields[7]);
        r.loss_shortcut = parse_double(fields[8]);
        r.loss_clean = parse_double(fields[9]);
        r.loss_diff = parse_double(fields[10]);
        out.push_back(std::move(r));
    }
    return out;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows,
                       const std::vector<std::string>& group_keys) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    for (size_t i = 0; i < group_keys.size(); ++i) f << (i ? "," : "") << group_keys[i];
    f << ",count";
    for (const auto& [mname, mptr] : kMetrics) f << ',' << mname << "_mean," << mname << "_std";
    f << '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < group_keys.size(); ++i)
            f << (i ? "," : "") << row.group.at(group_keys[i]);
        f << ',' << row.count;
        for (const auto& [mname, mptr] : kMetrics) {
            auto [mean, sd] = row.stats.at(mname);
            f << ',' << format_double(mean) << ',' << format_double(sd);
        }
        f << '\n';
    }
}

}  // namespace sclab::eval
