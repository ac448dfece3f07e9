#pragma once

// Command-line front end. Subcommands: body, solve, envelope, combine, bm,
// dominate, rearrange, iso, probe.

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hbm {

/// One run. Defaults come from defaults_for(), which also feeds --help.
struct RunConfig {
    std::string subcommand;
    std::vector<std::string> bodies;  ///< body specs: a file path or inline JSON
    std::vector<std::string> fields;  ///< field snapshot paths (envelope, combine)
    int resolution = 33;
    std::vector<double> t_list;
    std::vector<double> p_list;
    std::uint64_t seed = 7;
    int jobs = 1;
    double c_tol = 5;
    double residual_rtol = 1e-6;
    std::string out_dir = "hbm_out";
    bool refine = false;
    bool timing = false;
    bool battery = false;
    std::string functional = "tau2";  ///< bm: tau2 | tau2p | lambda2
    std::string problem = "torsion";  ///< solve: torsion | eigen | power
    int n_max = 0;                    ///< rearrange: rotation-mean steps
    std::string which = "f";          ///< probe: f | g | all
    std::string p_kind = "identity";  ///< probe: identity | pg
    int trials = 10000;
    int pl_samples = 20000;

    /// Canonical form: sorted keys, p = inf written as "inf".
    nlohmann::json to_json() const;
    /// Throws std::invalid_argument naming the offending field.
    static RunConfig from_json(const nlohmann::json& j);
    /// Field-level checks shared by both entry points.
    void validate() const;
};

/// Defaults of one subcommand; throws on an unknown name.
RunConfig defaults_for(const std::string& subcommand);
const std::vector<std::string>& subcommands();

/// Comma list of numbers; "inf" is accepted. `field` names the list in errors.
std::vector<double> parse_number_list(const std::string& text, const std::string& field);
std::string format_number_list(const std::vector<double>& v);

/// 0: every verdict passes, or the run is informational. 2: some verdict
/// does not pass. 1: execution error (diagnostic on `err`).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

/// Runs a parsed config.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace hbm
