#include "load/app/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace load::app {

namespace fs = std::filesystem;

RunData load_run(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError({"run directory " + dir.string() + " does not exist"});
    const Config cfg = load_config(dir / "config.json");
    const fs::path metrics = dir / "metrics.csv";
    if (!fs::exists(metrics)) throw ConfigError({"run directory " + dir.string() + " has no metrics.csv"});
    RunData r;
    r.dir = dir;
    r.task = cfg.train.task;
    r.method = method_label(cfg.train);
    r.seed = cfg.train.seed;
    r.rows = train::read_metrics(metrics);
    if (r.rows.empty()) throw GridMismatch("run " + dir.string() + " has no evaluation rows");
    return r;
}

std::vector<Curve> aggregate(const std::vector<RunData>& runs) {
    std::map<std::string, std::vector<double>> grid;  // per task
    std::map<std::pair<std::string, std::string>, std::vector<const RunData*>> groups;
    for (const auto& r : runs) {
        std::vector<double> steps;
        for (const auto& row : r.rows) steps.push_back(static_cast<double>(row.step));
        auto [it, fresh] = grid.emplace(r.task, steps);
        if (!fresh && it->second != steps)
            throw GridMismatch("runs of task " + r.task + " have different evaluation steps (" + r.dir.string() + ")");
        groups[{r.task, r.method}].push_back(&r);
    }
    std::vector<Curve> curves;
    for (const auto& [key, members] : groups) {
        Curve c;
        c.task = key.first;
        c.method = key.second;
        c.seeds = static_cast<int>(members.size());
        c.steps = grid.at(c.task);
        const double n = static_cast<double>(members.size());
        for (std::size_t i = 0; i < c.steps.size(); ++i) {
            double sum = 0;
            for (const RunData* r : members) sum += r->rows[i].eval_sr;
            const double mean = sum / n;
            double ss = 0;
            for (const RunData* r : members) ss += (r->rows[i].eval_sr - mean) * (r->rows[i].eval_sr - mean);
            c.mean.push_back(mean);
            c.std_error.push_back(members.size() > 1 ? std::sqrt(ss / (n - 1)) / std::sqrt(n) : 0.0);
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

std::vector<AucEntry> auc_table(const std::vector<Curve>& curves, const std::string& reference) {
    std::vector<AucEntry> out;
    for (const auto& ref : curves) {
        if (ref.method != reference) continue;
        for (const auto& c : curves) {
            if (c.task != ref.task) continue;
            // Undefined when the reference never succeeds.
            const double area = train::trapezoid(ref.steps, ref.mean);
            out.push_back({c.task, c.method,
                           area > 0 ? train::auc_percent(c.steps, c.mean, ref.mean)
                                    : std::numeric_limits<double>::quiet_NaN()});
        }
    }
    return out;
}

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
}

std::string escape(const std::string& text) {
    std::string s;
    for (char ch : text) {
        switch (ch) {
            case '&': s += "&amp;"; break;
            case '<': s += "&lt;"; break;
            case '>': s += "&gt;"; break;
            case '"': s += "&quot;"; break;
            default: s += ch;
        }
    }
    return s;
}

}  // namespace

std::string curves_svg(const std::string& task, const std::vector<Curve>& curves) {
    constexpr double kW = 640, kH = 400, kL = 60, kR = 170, kT = 40, kB = 50;
    double max_step = 1;
    for (const auto& c : curves)
        if (c.task == task && !c.steps.empty()) max_step = std::max(max_step, c.steps.back());
    auto x = [&](double step) { return kL + (kW - kL - kR) * step / max_step; };
    auto y = [&](double sr) { return kH - kB - (kH - kT - kB) * std::clamp(sr, 0.0, 1.0); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
      << kW << ' ' << kH << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << escape(task) << "</text>\n";
    s << "<line x1=\"" << kL << "\" y1=\"" << y(0) << "\" x2=\"" << x(max_step) << "\" y2=\"" << y(0)
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << kL << "\" y1=\"" << y(0) << "\" x2=\"" << kL << "\" y2=\"" << y(1)
      << "\" stroke=\"black\"/>\n";
    for (double v : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        s << "<text x=\"" << kL - 6 << "\" y=\"" << fmt(y(v) + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v) << "</text>\n";
    }
    s << "<text x=\"" << fmt(x(max_step)) << "\" y=\"" << kH - kB + 18
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << static_cast<long long>(max_step)
      << "</text>\n";
    s << "<text x=\"" << (kL + x(max_step)) / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">environment steps</text>\n";
    s << "<text x=\"16\" y=\"" << (kT + kH - kB) / 2 << "\" transform=\"rotate(-90 16 " << (kT + kH - kB) / 2
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">eval success rate</text>\n";

    int k = 0;
    for (const auto& c : curves) {
        if (c.task != task) continue;
        const char* color = kPalette[k % 10];
        if (c.seeds > 1) {
            s << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < c.steps.size(); ++i)
                s << fmt(x(c.steps[i])) << ',' << fmt(y(c.mean[i] + c.std_error[i])) << ' ';
            for (std::size_t i = c.steps.size(); i-- > 0;)
                s << fmt(x(c.steps[i])) << ',' << fmt(y(c.mean[i] - c.std_error[i])) << ' ';
            s << "\"/>\n";
        }
        s << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < c.steps.size(); ++i) s << fmt(x(c.steps[i])) << ',' << fmt(y(c.mean[i])) << ' ';
        s << "\"/>\n";
        const double ly = kT + 16.0 * k;
        s << "<line x1=\"" << kW - kR + 12 << "\" y1=\"" << ly << "\" x2=\"" << kW - kR + 32 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << kW - kR + 36 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
          << escape(c.method) << " (n=" << c.seeds << ")</text>\n";
        ++k;
    }
    s << "</svg>\n";
    return s.str();
}

std::string auc_svg(const std::vector<AucEntry>& entries) {
    constexpr double kW = 640, kRow = 22, kLabel = 260, kT = 40;
    double top = 100;
    for (const auto& e : entries)
        if (std::isfinite(e.auc_percent)) top = std::max(top, e.auc_percent);
    const double span = kW - kLabel - 70;
    const double h = kT + kRow * static_cast<double>(entries.size()) + 20;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << h << "\" viewBox=\"0 0 " << kW
      << ' ' << h << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << kW / 2
      << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">%AUC vs oracle</text>\n";
    const double x100 = kLabel + span * 100 / top;
    s << "<line x1=\"" << fmt(x100) << "\" y1=\"" << kT - 4 << "\" x2=\"" << fmt(x100) << "\" y2=\"" << h - 16
      << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const double y = kT + kRow * static_cast<double>(i);
        s << "<text x=\"" << kLabel - 6 << "\" y=\"" << y + 14
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << escape(e.task) << " / "
          << escape(e.method) << "</text>\n";
        if (!std::isfinite(e.auc_percent)) {
            s << "<text x=\"" << kLabel + 4 << "\" y=\"" << y + 14
              << "\" font-family=\"sans-serif\" font-size=\"11\">undefined (reference never succeeds)</text>\n";
            continue;
        }
        s << "<rect class=\"bar\" x=\"" << kLabel << "\" y=\"" << y + 3 << "\" width=\""
          << fmt(span * std::max(0.0, e.auc_percent) / top) << "\" height=\"" << kRow - 6 << "\" fill=\""
          << kPalette[i % 10] << "\"/>\n";
        s << "<text x=\"" << fmt(kLabel + span * std::max(0.0, e.auc_percent) / top + 4) << "\" y=\"" << y + 14
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(e.auc_percent) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::vector<fs::path> write_report(const std::vector<RunData>& runs, const fs::path& out_dir,
                                   const std::string& reference) {
    const auto curves = aggregate(runs);
    const auto auc = auc_table(curves, reference);
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    auto save = [&](const fs::path& name, const std::string& text) {
        const fs::path p = out_dir / name;
        std::ofstream out(p, std::ios::binary);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + p.string());
        written.push_back(p);
    };
    std::vector<std::string> tasks;
    for (const auto& c : curves)
        if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) tasks.push_back(c.task);
    for (const auto& t : tasks) save("curves_" + t + ".svg", curves_svg(t, curves));
    save("auc.svg", auc_svg(auc));

    std::ostringstream csv;
    csv << std::setprecision(17) << "task,method,seeds,step,mean,stderr\n";
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.steps.size(); ++i)
            csv << c.task << ',' << c.method << ',' << c.seeds << ',' << static_cast<long long>(c.steps[i]) << ','
                << c.mean[i] << ',' << c.std_error[i] << '\n';
    save("report.csv", csv.str());

    std::ostringstream a;
    a << std::setprecision(17) << "task,method,auc_percent\n";
    for (const auto& e : auc) a << e.task << ',' << e.method << ',' << e.auc_percent << '\n';
    save("auc.csv", a.str());
    return written;
}

}  // namespace load::app
