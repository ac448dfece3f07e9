#pragma once

// Numerical certification of the inequalities: Brunn-Minkowski for tau_2,
// tau_{2,p} and Lambda_2, domination of the torsion solution by the combined
// supersolution, Prekopa-Leindler, the Urysohn L^p rearrangement and the
// isoperimetric comparisons.

#include "hbm/convexify.hpp"
#include "hbm/functionals.hpp"

#include "json.hpp"

#include <functional>
#include <future>
#include <ostream>
#include <string>
#include <vector>

namespace hbm {

enum class Verdict { Pass, Fail, EqualityCandidate, Unevaluable, HypothesisFail };
std::string verdict_name(Verdict v);
/// Pass and equality-candidate count as success.
bool verdict_ok(Verdict v);

struct InequalityReport {
    std::string id;
    nlohmann::json instance;  ///< bodies, t, p, resolution, seed
    double lhs = 0;
    double rhs = 0;
    double margin = 0;        ///< lhs - rhs, >= 0 means the inequality holds
    double tol = 0;
    Verdict verdict = Verdict::Unevaluable;
    double seconds = 0;
    std::string note;
    nlohmann::json to_json() const;
};

struct HarnessOptions {
    int resolution = 33;
    int jobs = 1;
    /// tol(h) = c_tol * scale * h_rel^2 with h_rel = 1/(resolution-1).
    double c_tol = 5;
    /// Rerun at 2*resolution-1 and require the verdict to survive.
    bool refine = false;
    std::uint64_t seed = 7;
    int pl_samples = 20000;
    SolverOptions solver;
};

double discretization_tol(const HarnessOptions& opt, double scale);

/// Fail below -tol; equality-candidate when |margin| <= tol on a homothetic instance.
Verdict classify(double margin, double tol, bool homothetic);

/// Runs f(0..n-1) on up to `jobs` workers; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, int jobs, const std::function<T(std::size_t)>& f) {
    std::vector<T> out(n);
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    for (std::size_t lo = 0; lo < n; lo += static_cast<std::size_t>(jobs)) {
        std::vector<std::future<T>> batch;
        for (std::size_t i = lo; i < std::min(n, lo + static_cast<std::size_t>(jobs)); ++i)
            batch.push_back(std::async(std::launch::async, f, i));
        for (std::size_t i = 0; i < batch.size(); ++i) out[lo + i] = batch[i].get();
    }
    return out;
}

struct BmTarget {
    enum class Kind { Tau2, Tau2p, Lambda2 };
    Kind kind = Kind::Tau2;
    double p = 1;

    /// F^exponent is concave and 1-homogeneous: 1/10, (p+1)/(p+10), -1/4.
    double exponent() const;
    std::string name() const;
    /// "tau2", "tau2p" (with p), "lambda2".
    static BmTarget parse(const std::string& name, double p = 1);
};

/// One report per t: F(Omega_t)^g against (1-t) F(Omega_0)^g + t F(Omega_1)^g.
std::vector<InequalityReport> bm_check(const BmTarget& f, const SupportBody& body0, const SupportBody& body1,
                                       const std::vector<double>& t_list, const HarnessOptions& opt);

struct DominationRun {
    InequalityReport report;
    Field u_t;      ///< torsion solution on Omega_t
    Field tilde_u;  ///< -v_t^2 from the combined square-root transforms
    Field u0, u1;
    double bulk_min = 0;  ///< same minimum over nodes at least a quarter of the maximal depth inside
};

/// margin = min over interior nodes at depth >= 2h of (tilde_u_t - u_t).
DominationRun domination_run(const SupportBody& body0, const SupportBody& body1, double t,
                             const HarnessOptions& opt);
InequalityReport domination_check(const SupportBody& body0, const SupportBody& body1, double t,
                                  const HarnessOptions& opt);

/// Hypothesis h((1-t)x + ty) >= f(x)^(1-t) g(y)^t on sampled node pairs, then
/// the integral margin int h - (int f)^(1-t) (int g)^t. Fields are extended by
/// zero outside their domains.
InequalityReport prekopa_leindler_check(const Field& f, const Field& g, const Field& h, double t,
                                        const HarnessOptions& opt);

/// ||u_sharp||_p - ||u||_p per p (p = inf allowed); with n_max > 0 also the
/// rotation-mean sequence: ||u_N||_p - ||u||_p and max|tilde u_N| vs max|u|.
std::vector<InequalityReport> urysohn_rearrangement(const SupportBody& body, int n_max,
                                                    const std::vector<double>& p_list,
                                                    const HarnessOptions& opt);

/// Four margins (UryL, Ury1, IsoL, Iso1) for Omega against the mean-width
/// ball and the equal-area ball, plus the chain reports: radius ordering and
/// the implication order of the margins.
std::vector<InequalityReport> isoperimetric_check(const SupportBody& body, const HarnessOptions& opt);

struct BodyPair {
    std::string name;
    SupportBody body0;
    SupportBody body1;
};
/// ball{1}/ball{2}, a homothetic ellipsoid pair and three seeded random
/// rotated ellipsoid pairs.
std::vector<BodyPair> pair_battery(std::uint64_t seed);

/// Columns id,t,p,lhs,rhs,margin,tol,verdict,seconds. The seconds column is
/// left empty unless `timing` is set, so repeated runs are byte-identical.
void write_csv(std::ostream& out, const std::vector<InequalityReport>& reports, bool timing = false);
void write_jsonl(std::ostream& out, const std::vector<InequalityReport>& reports);
/// <dir>/<stem>.csv, <dir>/<stem>.jsonl and the <dir>/<stem>.meta.json sidecar
/// (timestamp, runtimes, `meta`).
void write_reports(const std::string& dir, const std::string& stem, const std::vector<InequalityReport>& reports,
                   const nlohmann::json& meta, bool timing = false);

}  // namespace hbm
