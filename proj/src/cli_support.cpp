#include "safer/cli_support.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace safer::cli {

namespace {

using nlohmann::json;

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string compact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

[[noreturn]] void bad_key(const std::string& where, const std::string& key) {
    throw ConfigError("config: unknown " + where + " key '" + key + "'");
}

void apply_design(design::TrialDesign& d, const json& block) {
    if (!block.is_object()) throw ConfigError("config: 'design' must be an object");
    for (const auto& [key, val] : block.items()) {
        try {
            if (key == "alpha") d.alpha = val.get<double>();
            else if (key == "power_target") d.power_target = val.get<double>();
            else if (key == "hr_margin") d.hr_margin = val.get<double>();
            else if (key == "hr_alt") d.hr_alt = val.get<double>();
            else if (key == "pi_design") d.pi_design = val.get<double>();
            else if (key == "info_fraction") d.info_fraction = val.get<double>();
            else if (key == "accrual_months") d.accrual_months = val.get<double>();
            else if (key == "followup_months") d.followup_months = val.get<double>();
            else if (key == "control_median") d.control_median = val.get<double>();
            else if (key == "update_interval") d.update_interval = val.get<double>();
            else if (key == "n_updates") d.n_updates = val.get<int>();
            else if (key == "pi_lower") d.pi_lower = val.get<double>();
            else if (key == "pi_upper") d.pi_upper = val.get<double>();
            else if (key == "min_phi_events") d.min_phi_events = val.get<int>();
            else if (key == "phi_margin_shifted") d.phi_margin_shifted = val.get<bool>();
            else bad_key("design", key);
        } catch (const json::type_error&) {
            throw ConfigError("config: bad type for design key '" + key + "'");
        }
    }
}

std::vector<double> number_array(const json& val, const std::string& key) {
    if (!val.is_array()) throw ConfigError("config: '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : val) {
        if (!x.is_number()) throw ConfigError("config: '" + key + "' must contain only numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

void validate(const RunConfig& c) {
    if (c.format != "csv" && c.format != "json" && c.format != "text")
        throw ConfigError("config: format must be csv, json, or text");
    if (c.replicates <= 0) throw ConfigError("config: replicates must be positive");
    if (c.parallelism < 0) throw ConfigError("config: parallelism must be >= 0");
}

json design_json(const design::TrialDesign& d) {
    return json{{"alpha", d.alpha},
                {"power_target", d.power_target},
                {"hr_margin", d.hr_margin},
                {"hr_alt", d.hr_alt},
                {"pi_design", d.pi_design},
                {"info_fraction", d.info_fraction},
                {"accrual_months", d.accrual_months},
                {"followup_months", d.followup_months},
                {"control_median", d.control_median},
                {"update_interval", d.update_interval},
                {"n_updates", d.n_updates},
                {"pi_lower", d.pi_lower},
                {"pi_upper", d.pi_upper},
                {"min_phi_events", d.min_phi_events},
                {"phi_margin_shifted", d.phi_margin_shifted}};
}

json config_to_json(const RunConfig& c) {
    return json{{"design", design_json(c.design)},
                {"replicates", c.replicates},
                {"seed", c.seed},
                {"parallelism", c.parallelism},
                {"format", c.format},
                {"out", c.out},
                {"scenario", c.scenario},
                {"cells", c.cells},
                {"trajectories", c.trajectories},
                {"pi_grid", c.pi_grid},
                {"if_grid", c.if_grid}};
}

json tags_json(const mc::CellSpec& cell) {
    json t = json::object();
    for (const auto& [k, v] : cell.tags) t[k] = v;
    return t;
}

json summary_json(const mc::SimulationSummary& s) {
    return json{{"replicates", s.n_replicates},
                {"power", s.power},
                {"power_interim", s.power_interim},
                {"mc_se_power", s.mc_se_power},
                {"mean_alloc_e", s.mean_alloc_e},
                {"mc_se_alloc", s.mc_se_alloc},
                {"ae_rate_control", s.ae_rate_control},
                {"ae_rate_experimental", s.ae_rate_experimental},
                {"ae_rate_total", s.ae_rate_total},
                {"ae_rate_nominal_control", s.ae_rate_nominal_control},
                {"ae_rate_nominal_experimental", s.ae_rate_nominal_experimental},
                {"ae_rate_nominal_total", s.ae_rate_nominal_total},
                {"mean_events_final", s.mean_events_final},
                {"interim_reached_rate", s.interim_reached_rate},
                {"mean_interim_month", s.mean_interim_month},
                {"mean_enrolled_at_stop", s.mean_enrolled_at_stop},
                {"mean_alloc_e_at_stop", s.mean_alloc_e_at_stop}};
}

// Tag keys shared by every catalog cell, in emission order.
const std::vector<std::string>& tag_columns() {
    static const std::vector<std::string> cols = {
        "scenario", "policy",     "eta",     "median_e",   "median_c",
        "pi",       "if",         "hyp",     "assoc",      "pfs_median",
        "dropout",  "underreport", "strategy"};
    return cols;
}

// Empty selections are legal: the caller gets a warning and an empty run.
std::vector<mc::CellSpec> select_cells(const RunConfig& cfg, std::vector<std::string>* warnings) {
    std::vector<mc::CellSpec> catalog;
    try {
        catalog = mc::builtin_scenarios(cfg.scenario);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto want = parse_cell_filter(cfg.cells);
    auto picked = want.empty() ? catalog : mc::matched_cells(catalog, want);
    if (picked.empty() && warnings)
        warnings->push_back("selection: no cells match '" + cfg.cells + "', nothing to run");
    return picked;
}

}  // namespace

RunConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    RunConfig c;
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "design") apply_design(c.design, val);
            else if (key == "replicates") c.replicates = val.get<long>();
            else if (key == "seed") c.seed = val.get<std::uint64_t>();
            else if (key == "parallelism") c.parallelism = val.get<int>();
            else if (key == "format") c.format = val.get<std::string>();
            else if (key == "out") c.out = val.get<std::string>();
            else if (key == "scenario") c.scenario = val.get<std::string>();
            else if (key == "cells") c.cells = val.get<std::string>();
            else if (key == "trajectories") c.trajectories = val.get<bool>();
            else if (key == "pi_grid") c.pi_grid = number_array(val, key);
            else if (key == "if_grid") c.if_grid = number_array(val, key);
            else bad_key("top-level", key);
        } catch (const json::type_error&) {
            throw ConfigError("config: bad type for key '" + key + "'");
        }
    }
    validate(c);
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_json(buf.str());
}

std::vector<std::pair<std::string, std::string>> parse_cell_filter(const std::string& filter) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string item;
    std::istringstream in(filter);
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
            throw ConfigError("selection: expected key=value, got '" + item + "'");
        out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return out;
}

std::vector<double> parse_grid(const std::string& comma_list) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(comma_list);
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("grid: '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw ConfigError("grid: empty");
    return out;
}

int resolved_parallelism(const RunConfig& cfg) {
    if (cfg.parallelism > 0) return cfg.parallelism;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string design_report_text(const design::TrialDesign& d, const design::DesignReport& r) {
    std::ostringstream out;
    const auto line = [&](const char* name, const std::string& value) {
        out << name << " " << value << "\n";
    };
    line("alpha                ", compact(d.alpha));
    line("power_target         ", compact(d.power_target));
    line("hr_margin            ", compact(d.hr_margin));
    line("hr_alt               ", compact(d.hr_alt));
    line("pi_design            ", compact(d.pi_design));
    line("info_fraction        ", compact(d.info_fraction));
    line("lambda_bar           ", compact(r.lambda_bar));
    line("fixed_events         ", std::to_string(r.events_fixed));
    line("fixed_n              ", std::to_string(r.n_fixed));
    line("gs_events            ", std::to_string(r.events_gs));
    line("gs_n                 ", std::to_string(r.n_gs));
    line("interim_target_events", std::to_string(r.interim_target));
    line("alpha1               ", compact(r.bounds.alpha1));
    line("c1                   ", compact(r.bounds.c1));
    line("c2                   ", compact(r.bounds.c2));
    line("rho                  ", compact(r.bounds.rho));
    line("power_total          ", compact(r.power_at_events_gs));
    line("power_interim        ", compact(r.power1_at_events_gs));
    return out.str();
}

std::string design_report_json(const design::TrialDesign& d, const design::DesignReport& r) {
    json j{{"design", design_json(d)},
           {"fixed_events", r.events_fixed},
           {"fixed_n", r.n_fixed},
           {"gs_events", r.events_gs},
           {"gs_n", r.n_gs},
           {"interim_target_events", r.interim_target},
           {"alpha1", r.bounds.alpha1},
           {"c1", r.bounds.c1},
           {"c2", r.bounds.c2},
           {"rho", r.bounds.rho},
           {"power_total", r.power_at_events_gs},
           {"power_interim", r.power1_at_events_gs},
           {"lambda_bar", r.lambda_bar}};
    return j.dump(2) + "\n";
}

namespace {

struct CurveRow {
    double info = 0, pi = 0;
    long events = 0, n = 0;
    design::Boundaries bounds;
    design::GsPower power;
};

std::vector<CurveRow> power_curve_rows(const design::TrialDesign& d,
                                       const std::vector<double>& if_grid,
                                       const std::vector<double>& pi_grid) {
    std::vector<CurveRow> rows;
    for (const double info : if_grid) {
        design::TrialDesign di = d;
        di.info_fraction = info;
        const design::DesignReport rep = design::design_report(di);
        for (const double pi : pi_grid) {
            CurveRow row;
            row.info = info;
            row.pi = pi;
            row.events = rep.events_gs;
            row.n = rep.n_gs;
            row.bounds = rep.bounds;
            row.power =
                design::gs_power(rep.events_gs, rep.bounds, info, pi, d.hr_margin, d.hr_alt);
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace

std::string power_curve_csv(const design::TrialDesign& d, const std::vector<double>& if_grid,
                            const std::vector<double>& pi_grid) {
    std::ostringstream out;
    out << "if,pi,events,n,alpha1,c1,c2,power,power_interim\n";
    for (const CurveRow& r : power_curve_rows(d, if_grid, pi_grid)) {
        out << compact(r.info) << "," << compact(r.pi) << "," << r.events << "," << r.n << ","
            << compact(r.bounds.alpha1) << "," << fixed6(r.bounds.c1) << ","
            << fixed6(r.bounds.c2) << "," << fixed6(r.power.total) << ","
            << fixed6(r.power.at_interim) << "\n";
    }
    return out.str();
}

std::string power_curve_json(const design::TrialDesign& d, const std::vector<double>& if_grid,
                             const std::vector<double>& pi_grid) {
    json arr = json::array();
    for (const CurveRow& r : power_curve_rows(d, if_grid, pi_grid)) {
        arr.push_back(json{{"if", r.info},
                           {"pi", r.pi},
                           {"events", r.events},
                           {"n", r.n},
                           {"alpha1", r.bounds.alpha1},
                           {"c1", r.bounds.c1},
                           {"c2", r.bounds.c2},
                           {"power", r.power.total},
                           {"power_interim", r.power.at_interim}});
    }
    return arr.dump(2) + "\n";
}

std::vector<CellResult> run_cells(const RunConfig& cfg, std::vector<std::string>* warnings) {
    const auto cells = select_cells(cfg, warnings);
    const int par = resolved_parallelism(cfg);
    std::vector<CellResult> out;
    out.reserve(cells.size());
    for (const auto& cell : cells) {
        try {
            out.push_back({cell, mc::run_scenario(cell, cfg.replicates, cfg.seed, par)});
        } catch (const std::exception& e) {
            // One broken cell must not take the rest of the grid down.
            if (!warnings)
                throw;
            warnings->push_back("cell " + std::to_string(cell.cell_id) + " (" + cell.label +
                                "): " + e.what());
        }
    }
    return out;
}

std::string summaries_csv(const std::vector<CellResult>& results) {
    std::ostringstream out;
    out << "cell_id";
    for (const auto& col : tag_columns()) out << "," << col;
    out << ",replicates,power,power_interim,mc_se_power,mean_alloc_e,mc_se_alloc,"
           "ae_rate_control,ae_rate_experimental,ae_rate_total,ae_rate_nominal_control,"
           "ae_rate_nominal_experimental,ae_rate_nominal_total,mean_events_final,"
           "interim_reached_rate,mean_interim_month,mean_enrolled_at_stop,"
           "mean_alloc_e_at_stop\n";
    for (const auto& [cell, s] : results) {
        out << cell.cell_id;
        for (const auto& col : tag_columns()) out << "," << mc::tag_value(cell, col);
        out << "," << s.n_replicates << "," << fixed6(s.power) << "," << fixed6(s.power_interim)
            << "," << fixed6(s.mc_se_power) << "," << fixed6(s.mean_alloc_e) << ","
            << fixed6(s.mc_se_alloc) << "," << fixed6(s.ae_rate_control) << ","
            << fixed6(s.ae_rate_experimental) << "," << fixed6(s.ae_rate_total) << ","
            << fixed6(s.ae_rate_nominal_control) << "," << fixed6(s.ae_rate_nominal_experimental)
            << "," << fixed6(s.ae_rate_nominal_total) << "," << fixed6(s.mean_events_final) << ","
            << fixed6(s.interim_reached_rate) << "," << fixed6(s.mean_interim_month) << ","
            << fixed6(s.mean_enrolled_at_stop) << "," << fixed6(s.mean_alloc_e_at_stop) << "\n";
    }
    return out.str();
}

std::string summaries_json(const std::vector<CellResult>& results, const RunConfig& cfg) {
    json arr = json::array();
    for (const auto& [cell, s] : results) {
        arr.push_back(json{{"cell_id", cell.cell_id},
                           {"label", cell.label},
                           {"tags", tags_json(cell)},
                           {"summary", summary_json(s)}});
    }
    // The config echo makes every summary file self-describing: feeding it
    // back through --config reproduces the run.
    json doc{{"config", config_to_json(cfg)}, {"results", arr}};
    return doc.dump(2) + "\n";
}

std::vector<CellTrajectory> run_trajectories(const RunConfig& cfg,
                                             std::vector<std::string>* warnings) {
    const auto cells = select_cells(cfg, warnings);
    const int par = resolved_parallelism(cfg);
    std::vector<CellTrajectory> out;
    out.reserve(cells.size());
    for (const auto& cell : cells) {
        try {
            out.push_back({cell, mc::allocation_trajectory(cell, cfg.replicates, cfg.seed, par)});
        } catch (const std::exception& e) {
            if (!warnings)
                throw;
            warnings->push_back("cell " + std::to_string(cell.cell_id) + " (" + cell.label +
                                "): " + e.what());
        }
    }
    return out;
}

std::string trajectories_csv(const std::vector<CellTrajectory>& rows) {
    std::ostringstream out;
    out << "cell_id,scenario,label,month,q25,median,q75\n";
    for (const auto& [cell, t] : rows) {
        for (std::size_t u = 0; u < t.update_months.size(); ++u) {
            out << cell.cell_id << "," << cell.scenario << "," << cell.label << ","
                << compact(t.update_months[u]) << "," << fixed6(t.q25[u]) << ","
                << fixed6(t.median[u]) << "," << fixed6(t.q75[u]) << "\n";
        }
    }
    return out.str();
}

std::string trajectories_json(const std::vector<CellTrajectory>& rows, const RunConfig& cfg) {
    json arr = json::array();
    for (const auto& [cell, t] : rows) {
        arr.push_back(json{{"cell_id", cell.cell_id},
                           {"label", cell.label},
                           {"tags", tags_json(cell)},
                           {"months", t.update_months},
                           {"q25", t.q25},
                           {"median", t.median},
                           {"q75", t.q75}});
    }
    json doc{{"config", config_to_json(cfg)}, {"results", arr}};
    return doc.dump(2) + "\n";
}

std::string scenarios_csv(const std::vector<mc::CellSpec>& catalog) {
    std::ostringstream out;
    out << "cell_id,label";
    for (const auto& col : tag_columns()) out << "," << col;
    out << "\n";
    for (const auto& cell : catalog) {
        out << cell.cell_id << "," << cell.label;
        for (const auto& col : tag_columns()) out << "," << mc::tag_value(cell, col);
        out << "\n";
    }
    return out.str();
}

std::string scenarios_json(const std::vector<mc::CellSpec>& catalog) {
    json arr = json::array();
    for (const auto& cell : catalog)
        arr.push_back(json{{"cell_id", cell.cell_id}, {"label", cell.label},
                           {"tags", tags_json(cell)}});
    return arr.dump(2) + "\n";
}

void write_output(const std::string& out_dir, const std::string& basename,
                  const std::string& content) {
    if (out_dir.empty()) {
        std::cout << content;
        return;
    }
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw ConfigError("output: cannot create directory '" + out_dir + "'");
    const fs::path path = fs::path(out_dir) / basename;
    std::ofstream out(path);
    if (!out) throw ConfigError("output: cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw ConfigError("output: write failed for '" + path.string() + "'");
}

}  // namespace safer::cli
