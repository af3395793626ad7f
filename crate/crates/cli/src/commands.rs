use std::error::Error;
use std::fs;

use freearm::analytics::{
    cluster_resources_per_unit, cz_success, formula_row, ftel_success, resources_per_link,
    step_back_prob,
};
use freearm::fock::{
    cz_via_cs, dual_rail, f_teleport, ideal_cz, logical_fidelity, make_teleport_ancilla, CzBranch,
};
use freearm::statevec::{
    arm_needs_link_correction, bell_teleport, build_chain_state, evolve_program, fail_weave,
    fidelity, link_state, pauli_z, random_program, weave, weave_target_state, BranchPolicy, DofId,
    EvolveOptions, PhotonId, Program, PureState,
};
use freearm::walker::{
    aggregate, cluster_model_rates, run_trials, run_weaves, weave_means, ClusterAttachStep,
    Estimate, LinkedChainStep, StepModel, WalkParams, WalkStats,
};
use freearm::{GateOrder, Rational};
use num_complex::Complex64;

use crate::args::{Command, EvolveArgs, OrderList, WalkArgs, WeaveModelArg};
use crate::records::write_records;
use crate::report::{Cell, Check, Report};

pub type RunResult = Result<Report, Box<dyn Error + Send + Sync>>;

/// Monte Carlo estimates must land within this relative error...
const MC_REL_TOL: f64 = 0.01;
/// ...and within this many standard errors of the closed form.
const MC_SIGMAS: f64 = 3.0;
const WEAVE_FIDELITY_TOL: f64 = 1e-10;
const PROBABILITY_TOL: f64 = 1e-12;
const TELEPORT_FIDELITY_TOL: f64 = 1e-9;
const EVOLVE_FIDELITY_TOL: f64 = 1e-9;
const FOCK_FIDELITY_TOL: f64 = 1e-10;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn run(command: &Command, seed: u64) -> RunResult {
    match command {
        Command::Analytic { n, m } => Ok(analytic(n, m)),
        Command::Walk(args) => walk(args, seed),
        Command::Cluster(args) => cluster(args, seed),
        Command::Weave { m, model, count } => weave_mc(*m, *model, *count, seed),
        Command::VerifyWeave => verify_weave(),
        Command::VerifyEvolve(args) => verify_evolve(args, seed),
        Command::FockCz { n } => fock_cz(*n),
    }
}

fn order_list(list: &OrderList) -> String {
    list.0
        .iter()
        .map(|o| o.get().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn analytic(ns: &OrderList, ms: &OrderList) -> Report {
    let mut r = Report::new(
        "analytic",
        &[
            "n",
            "m",
            "p",
            "q",
            "R",
            "units_per_link",
            "cs_per_link",
            "gate_cs",
            "gate_units",
            "weave_cs",
            "arms_per_chain",
            "cluster_units",
            "cluster_cs",
        ],
    )
    .param("n", order_list(ns).as_str())
    .param("m", order_list(ms).as_str());
    for &n in &ns.0 {
        for &m in &ms.0 {
            let row = formula_row(n, m);
            let link = row.per_link.as_ref();
            let gate = row.per_gate.as_ref();
            r.row(vec![
                u64::from(n.get()).into(),
                u64::from(m.get()).into(),
                Cell::exact(&row.cz_success),
                Cell::exact(&row.step_back),
                Cell::maybe_exact(row.attempts_per_link.as_ref()),
                Cell::maybe_exact(link.map(|l| &l.two_photon_units)),
                Cell::maybe_exact(link.map(|l| &l.cs_states)),
                Cell::maybe_exact(gate.map(|g| &g.construction_cs)),
                Cell::maybe_exact(gate.map(|g| &g.construction_units)),
                Cell::maybe_exact(gate.map(|g| &g.weave_cs)),
                Cell::exact(&row.free_arms_per_chain),
                Cell::exact(&row.cluster.two_photon_units),
                Cell::exact(&row.cluster.cs_states),
            ]);
        }
    }
    r.summary
        .push("p: CZ success; q: backward step; R: attempts per net link; '-' where n gives no forward drift".into());
    r
}

const MC_COLUMNS: [&str; 7] = [
    "quantity",
    "empirical",
    "stderr",
    "analytic",
    "rel_error",
    "sigmas",
    "within_tol",
];

/// One empirical-vs-analytic row; returns whether it converged.
fn mc_row(
    r: &mut Report,
    name: &str,
    est: Option<Estimate>,
    analytic: Option<&Rational>,
) -> Option<bool> {
    let (empirical, stderr) = match est {
        Some(e) => (Cell::Number(e.mean), Cell::Number(e.stderr)),
        None => (Cell::Null, Cell::Null),
    };
    let (rel, sig, ok) = match (est, analytic) {
        (Some(e), Some(a)) => {
            let target = a.to_f64();
            let rel = e.relative_error(target);
            let sig = e.sigmas_from(target);
            let ok = rel <= MC_REL_TOL && sig <= MC_SIGMAS;
            let sig_cell = if sig.is_finite() {
                Cell::Number(sig)
            } else {
                Cell::Null
            };
            (Cell::Number(rel), sig_cell, Some(ok))
        }
        _ => (Cell::Null, Cell::Null, None),
    };
    r.row(vec![
        Cell::text(name),
        empirical,
        stderr,
        Cell::maybe_exact(analytic),
        rel,
        sig,
        ok.map_or(Cell::Null, |b| Cell::text(if b { "yes" } else { "no" })),
    ]);
    ok
}

fn walk_params(args: &WalkArgs, seed: u64) -> WalkParams {
    WalkParams {
        n: args.n,
        target_links: args.target_links,
        trials: args.trials,
        seed,
        max_steps: args.max_steps,
        boundary: args.boundary.into(),
    }
}

fn walk_report(command: &str, args: &WalkArgs, seed: u64) -> Report {
    Report::new(command, &MC_COLUMNS)
        .param("n", u64::from(args.n.get()))
        .param("trials", args.trials)
        .param("target_links", args.target_links)
        .param("max_steps", args.max_steps)
        .param(
            "boundary",
            format!("{:?}", args.boundary).to_lowercase().as_str(),
        )
        .param("seed", seed)
}

fn run_summary(r: &mut Report, stats: &WalkStats) {
    r.summary.push(format!(
        "trials {} (completed {}, capped {}), steps {}, forward {}, backward {}, neutral {}",
        stats.trials,
        stats.completed_trials,
        stats.capped_trials,
        stats.steps_taken,
        stats.forward,
        stats.backward,
        stats.neutral
    ));
}

fn completed(stats: &WalkStats, e: Estimate) -> Option<Estimate> {
    (stats.completed_trials > 0).then_some(e)
}

fn convergence_check(r: &mut Report, verdicts: &[Option<bool>]) {
    let failed = verdicts.iter().filter(|v| **v == Some(false)).count();
    r.checks.push(Check::new(
        "convergence",
        failed == 0,
        format!(
            "{} of {} quantities within {}% and {} standard errors",
            verdicts.len() - failed,
            verdicts.len(),
            MC_REL_TOL * 100.0,
            MC_SIGMAS
        ),
    ));
}

fn divergence_check(r: &mut Report, drift: Estimate, analytic: &Rational) {
    r.checks.push(Check::info(
        "divergence",
        format!(
            "drift {} +/- {} (analytic {}): chains do not grow at this order; not converged",
            freearm::rational::format_significant(drift.mean, 6),
            freearm::rational::format_significant(drift.stderr, 3),
            analytic
        ),
    ));
}

fn simulate<M: StepModel>(
    model: &M,
    args: &WalkArgs,
    seed: u64,
) -> Result<WalkStats, Box<dyn Error + Send + Sync>> {
    let params = walk_params(args, seed);
    let trials = run_trials(model, &params)?;
    let stats = aggregate(&trials)?;
    if let Some(path) = &args.records {
        write_records(path, &params, &trials, &stats)
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(stats)
}

fn walk(args: &WalkArgs, seed: u64) -> RunResult {
    let stats = simulate(&LinkedChainStep { n: args.n }, args, seed)?;
    let mut r = walk_report("walk", args, seed);
    let drift = &cz_success(args.n) - &step_back_prob(args.n);
    match resources_per_link(args.n) {
        Ok(rates) => {
            let attempts = freearm::analytics::attempts_per_link(args.n)?;
            let v = [
                mc_row(
                    &mut r,
                    "attempts_per_net_link",
                    completed(&stats, stats.attempts_per_net_link),
                    Some(&attempts),
                ),
                mc_row(
                    &mut r,
                    "units_per_link",
                    completed(&stats, stats.units_per_link),
                    Some(&rates.two_photon_units),
                ),
                mc_row(
                    &mut r,
                    "cs_per_link",
                    completed(&stats, stats.cs_per_link),
                    Some(&rates.cs_states),
                ),
            ];
            mc_row(&mut r, "drift", Some(stats.drift), Some(&drift));
            convergence_check(&mut r, &v);
        }
        Err(_) => {
            mc_row(
                &mut r,
                "attempts_per_net_link",
                completed(&stats, stats.attempts_per_net_link),
                None,
            );
            mc_row(
                &mut r,
                "units_per_link",
                completed(&stats, stats.units_per_link),
                None,
            );
            mc_row(
                &mut r,
                "cs_per_link",
                completed(&stats, stats.cs_per_link),
                None,
            );
            mc_row(&mut r, "drift", Some(stats.drift), Some(&drift));
            divergence_check(&mut r, stats.drift, &drift);
        }
    }
    run_summary(&mut r, &stats);
    Ok(r)
}

fn cluster(args: &WalkArgs, seed: u64) -> RunResult {
    let stats = simulate(&ClusterAttachStep { n: args.n }, args, seed)?;
    let mut r = walk_report("cluster", args, seed);
    let closed = cluster_resources_per_unit(args.n);
    match cluster_model_rates(args.n) {
        Some(rates) => {
            let v = [
                mc_row(
                    &mut r,
                    "units_per_unit",
                    completed(&stats, stats.units_per_link),
                    Some(&rates.two_photon_units),
                ),
                mc_row(
                    &mut r,
                    "cs_per_unit",
                    completed(&stats, stats.cs_per_link),
                    Some(&rates.cs_states),
                ),
            ];
            let (p, q, _) = freearm::walker::attach_probabilities(args.n);
            mc_row(&mut r, "drift", Some(stats.drift), Some(&(&p - &q)));
            convergence_check(&mut r, &v);
        }
        None => {
            mc_row(
                &mut r,
                "units_per_unit",
                completed(&stats, stats.units_per_link),
                None,
            );
            mc_row(
                &mut r,
                "cs_per_unit",
                completed(&stats, stats.cs_per_link),
                None,
            );
            let (p, q, _) = freearm::walker::attach_probabilities(args.n);
            let drift = &p - &q;
            mc_row(&mut r, "drift", Some(stats.drift), Some(&drift));
            divergence_check(&mut r, stats.drift, &drift);
        }
    }
    r.checks.push(Check::info(
        "closed_form",
        format!(
            "published cluster formulas give {} units and {} CS per unit; the simulated repair model is exploratory",
            closed.two_photon_units.to_decimal(),
            closed.cs_states.to_decimal()
        ),
    ));
    run_summary(&mut r, &stats);
    Ok(r)
}

fn weave_mc(m: GateOrder, model: WeaveModelArg, count: u64, seed: u64) -> RunResult {
    let model = model.into();
    let stats = run_weaves(m, model, count, seed)?;
    let (cs, arms) = weave_means(m, model);
    let model_name = serde_json::to_value(model)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let mut r = Report::new("weave", &MC_COLUMNS)
        .param("m", u64::from(m.get()))
        .param("model", model_name.as_str())
        .param("count", count)
        .param("seed", seed);
    let v = [
        mc_row(&mut r, "cs_per_weave", Some(stats.cs), Some(&cs)),
        mc_row(
            &mut r,
            "arms_per_side",
            Some(stats.arms_per_side),
            Some(&arms),
        ),
    ];
    mc_row(&mut r, "arms_a", Some(stats.arms_a), Some(&arms));
    mc_row(&mut r, "arms_b", Some(stats.arms_b), Some(&arms));
    convergence_check(&mut r, &v);
    Ok(r)
}

fn verify_weave() -> RunResult {
    let mut r = Report::new(
        "verify-weave",
        &["path", "outcome", "probability", "fidelity", "schmidt_min"],
    );
    let (a, b) = (link_state(0, 1), link_state(1, 1));
    let target = weave_target_state(0, 1);
    let branches = weave(&a, &b, &DofId::arm(0, 2), &DofId::arm(1, 2))?;
    let mut min_f = f64::INFINITY;
    let mut worst_p: f64 = 0.0;
    for br in &branches {
        let f = fidelity(&br.state, &target)?;
        min_f = min_f.min(f);
        worst_p = worst_p.max((br.probability - 0.25).abs());
        let (xa, xb) = br.outcomes();
        r.row(vec![
            "weave".into(),
            Cell::text(format!("x={xa}{xb}")),
            br.probability.into(),
            f.into(),
            Cell::Null,
        ]);
    }
    r.summary.push(format!(
        "min branch fidelity {min_f:.6} ({} branches)",
        branches.len()
    ));
    r.checks.push(Check::new(
        "weave_fidelity",
        branches.len() == 4 && (1.0 - min_f).abs() <= WEAVE_FIDELITY_TOL,
        format!(
            "{} branches, 1 - min fidelity = {:.2e}",
            branches.len(),
            1.0 - min_f
        ),
    ));
    r.checks.push(Check::new(
        "weave_probability",
        worst_p <= PROBABILITY_TOL,
        format!("max |p - 1/4| = {worst_p:.2e}"),
    ));

    // Failure path: the arm is measured out in Z and the link stays usable.
    let data = (Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    let chain = build_chain_state(1, data)?;
    let expect = PureState::qubit(DofId::pol(0, 2), data.0, data.1)?;
    let (mut fail_schmidt, mut fail_f, mut tel_count) = (f64::INFINITY, f64::INFINITY, 0usize);
    for (rec, mut st) in fail_weave(&chain, &DofId::arm(0, 2))? {
        let [hi, lo] = st.schmidt_coefficients(&DofId::path(0, 1), &DofId::pol(0, 2))?;
        let schmidt = (hi - H).abs().max((lo - H).abs());
        fail_schmidt = fail_schmidt.min(lo);
        if arm_needs_link_correction(rec.outcome) {
            st.apply_single(&DofId::pol(0, 2), &pauli_z())?;
        }
        let mut branch_f = f64::INFINITY;
        for t in bell_teleport(&st, PhotonId::linked(0, 1))? {
            let mut out = t.state;
            t.frame.undo(&mut out)?;
            branch_f = branch_f.min(fidelity(&out, &expect)?);
            tel_count += 1;
        }
        fail_f = fail_f.min(branch_f);
        r.row(vec![
            "fail-weave".into(),
            Cell::text(format!("z={}", rec.outcome)),
            rec.probability.into(),
            branch_f.into(),
            lo.into(),
        ]);
        r.checks.push(Check::new(
            &format!("fail_schmidt_z{}", rec.outcome),
            schmidt <= WEAVE_FIDELITY_TOL,
            format!("coefficients ({hi:.12}, {lo:.12})"),
        ));
    }
    r.summary.push(format!(
        "failure path: min teleport fidelity {fail_f:.6} ({tel_count} branches), min Schmidt coefficient {fail_schmidt:.6}"
    ));
    r.checks.push(Check::new(
        "fail_teleport_fidelity",
        (1.0 - fail_f).abs() <= TELEPORT_FIDELITY_TOL,
        format!(
            "{tel_count} branches, 1 - min fidelity = {:.2e}",
            1.0 - fail_f
        ),
    ));
    Ok(r)
}

fn verify_evolve(args: &EvolveArgs, seed: u64) -> RunResult {
    let policy = match args.sample {
        Some(samples) => BranchPolicy::SampleSeeded { seed, samples },
        None => BranchPolicy::EnumerateAll,
    };
    let options = EvolveOptions {
        policy,
        ..EvolveOptions::default()
    };
    let programs: Vec<(String, Program)> = match &args.program {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
            let program: Program = serde_json::from_str(&text)
                .map_err(|e| format!("parsing {}: {e}", path.display()))?;
            vec![(path.display().to_string(), program)]
        }
        None => (0..args.programs)
            .map(|i| {
                let s = seed.wrapping_add(i);
                (
                    format!("seed {s}"),
                    random_program(s, args.qubits, args.cphases, args.links),
                )
            })
            .collect(),
    };
    let mut r = Report::new(
        "verify-evolve",
        &[
            "program",
            "qubits",
            "gates",
            "branches",
            "distinct_states",
            "probability_sum",
            "min_fidelity",
        ],
    )
    .param("links", args.links as u64)
    .param(
        "policy",
        if args.sample.is_some() {
            "sample"
        } else {
            "enumerate"
        },
    );
    if args.program.is_none() {
        r = r
            .param("programs", args.programs)
            .param("qubits", args.qubits as u64)
            .param("cphases", args.cphases as u64)
            .param("seed", seed);
    }
    if let Some(s) = args.sample {
        r = r.param("samples", s);
    }
    let (mut min_f, mut total) = (f64::INFINITY, 0u64);
    for (name, program) in &programs {
        let rep = evolve_program(program, args.links, &options)?;
        min_f = min_f.min(rep.min_fidelity);
        total += rep.branch_count;
        r.row(vec![
            Cell::text(name.clone()),
            (rep.qubits as u64).into(),
            (program.gates.len() as u64).into(),
            rep.branch_count.into(),
            (rep.distinct_states as u64).into(),
            rep.probability_sum.map_or(Cell::Null, Cell::Number),
            rep.min_fidelity.into(),
        ]);
    }
    r.summary
        .push(format!("min branch fidelity {min_f:.6} ({total} branches)"));
    r.checks.push(Check::new(
        "fidelity",
        min_f >= 1.0 - EVOLVE_FIDELITY_TOL,
        format!(
            "{} programs, 1 - min fidelity = {:.2e}",
            programs.len(),
            1.0 - min_f
        ),
    ));
    Ok(r)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Dual-rail input pairs for the CZ check. The first is generic, so every
/// branch appears with nonzero probability.
fn cz_inputs() -> Vec<([Complex64; 2], [Complex64; 2])> {
    vec![
        ([c(0.6, 0.0), c(0.0, 0.8)], [c(H, 0.0), c(-H, 0.0)]),
        ([c(H, 0.0), c(H, 0.0)], [c(H, 0.0), c(H, 0.0)]),
        ([c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]),
        ([c(0.28, 0.0), c(0.0, -0.96)], [c(0.8, 0.0), c(0.36, 0.48)]),
    ]
}

fn cz_fidelity(br: &CzBranch, a: [Complex64; 2], b: [Complex64; 2]) -> f64 {
    br.logical
        .as_ref()
        .map_or(0.0, |l| logical_fidelity(l, &ideal_cz(a, b)))
}

fn pattern(p: &[u8]) -> String {
    p.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
}

fn fock_cz(n: GateOrder) -> RunResult {
    let mut r = Report::new(
        "fock-cz",
        &["first", "second", "probability", "success", "fidelity"],
    )
    .param("n", u64::from(n.get()));

    let probe = dual_rail(c(0.6, 0.0), c(0.0, 0.8))?;
    let tel = f_teleport(&probe, 1, &make_teleport_ancilla(n), n)?;
    let tel_success: f64 = tel
        .iter()
        .filter(|b| b.success)
        .map(|b| b.probability)
        .sum();
    let tel_expect = ftel_success(n);

    let cz_expect = cz_success(n);
    let mut min_f = f64::INFINITY;
    let mut success_branches = 0usize;
    let mut worst_p: f64 = 0.0;
    for (idx, (a, b)) in cz_inputs().into_iter().enumerate() {
        let branches = cz_via_cs(&dual_rail(a[0], a[1])?, &dual_rail(b[0], b[1])?, n)?;
        let joint: f64 = branches
            .iter()
            .filter(|br| br.success)
            .map(|br| br.probability)
            .sum();
        worst_p = worst_p.max((joint - cz_expect.to_f64()).abs());
        for br in branches.iter().filter(|br| br.success) {
            min_f = min_f.min(cz_fidelity(br, a, b));
        }
        if idx == 0 {
            success_branches = branches.iter().filter(|br| br.success).count();
            for br in &branches {
                r.row(vec![
                    Cell::text(pattern(&br.first.pattern)),
                    Cell::text(pattern(&br.second.pattern)),
                    br.probability.into(),
                    Cell::text(if br.success { "yes" } else { "no" }),
                    if br.success {
                        Cell::Number(cz_fidelity(br, a, b))
                    } else {
                        Cell::Null
                    },
                ]);
            }
            r.summary.push(format!(
                "joint success {} (analytic {} = {}), {} branches, {} successful",
                freearm::rational::format_significant(joint, 12),
                cz_expect,
                cz_expect.to_decimal(),
                branches.len(),
                success_branches
            ));
        }
    }
    r.summary.push(format!(
        "f-teleport success {} (analytic {} = {})",
        freearm::rational::format_significant(tel_success, 12),
        tel_expect,
        tel_expect.to_decimal()
    ));
    r.summary.push(format!(
        "min branch fidelity {min_f:.6} ({success_branches} branches)"
    ));
    r.checks.push(Check::new(
        "teleport_success",
        (tel_success - tel_expect.to_f64()).abs() <= PROBABILITY_TOL,
        format!(
            "|p - {tel_expect}| = {:.2e}",
            (tel_success - tel_expect.to_f64()).abs()
        ),
    ));
    r.checks.push(Check::new(
        "cz_success",
        worst_p <= PROBABILITY_TOL,
        format!(
            "max |p - {cz_expect}| = {worst_p:.2e} over {} inputs",
            cz_inputs().len()
        ),
    ));
    r.checks.push(Check::new(
        "cz_fidelity",
        min_f >= 1.0 - FOCK_FIDELITY_TOL,
        format!(
            "1 - min fidelity = {:.2e} over every successful branch",
            1.0 - min_f
        ),
    ));
    Ok(r)
}
