// Small Lasso instance: stochastic SPB-SCPRSM against stochastic ADMM.

#include <iostream>

#include "splitkit/bench.hpp"

using namespace splitkit;

int main()
{
    const Generated g = gen_lasso(100, 80, 20, 1e-3, 1);
    const SplittingProblem p = make_problem(g.data, ModelKind::lasso, g.mu);
    const ReferenceSolution ref = solve_reference(p);

    SolverConfig spb;
    spb.name = "sto_spb_scprsm";
    spb.max_iters = 5000;

    SolverConfig admm = spb;
    admm.name = "sto_admm";
    admm.algorithm = Algorithm::sto_admm;

    RunOptions opt;
    opt.cadence = 1000;
    for (const SolverConfig& cfg : {spb, admm}) {
        const RunResult run = run_solver(p, cfg, opt);
        for (const TraceRecord& r : run.trace.records)
            std::cout << run.trace.solver << " t=" << r.iteration << " gap=" << ergodic_gap(r, ref.f_star, 1.0) << '\n';
    }
    return 0;
}
