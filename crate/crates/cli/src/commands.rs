use std::path::PathBuf;

use continuum_da::finite::{monte_carlo, run_trial, trial_seed, AggregateReport, MetricsSpec};
use continuum_da::formulas::{v_iid_hat, v_rsd_exact, v_rsd_hat};
use continuum_da::measures::{CountMode, LengthDistribution, Market, TypeMeasure};
use continuum_da::solver::{solve_stable, StableOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{self, Axis, CountKind, ExperimentConfig, FormulasConfig, Loaded, Point, SimulationConfig, Sweep};
use crate::error::CliError;
use crate::table::{num, opt, Table, Writer};

pub struct Context<'a> {
    pub loaded: &'a Loaded,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub trace: bool,
}

pub struct Report {
    pub files: Vec<PathBuf>,
    pub not_converged: usize,
    pub solves: usize,
}

impl Context<'_> {
    fn config(&self) -> &ExperimentConfig {
        &self.loaded.config
    }

    fn writer(&self, command: &str, seed: Option<u64>) -> Result<Writer, CliError> {
        let prefix = self.config().output.prefix.as_deref().unwrap_or(&self.loaded.stem);
        Writer::new(&self.out, prefix, command, &self.loaded.raw, self.config(), seed)
    }

    fn simulation(&self) -> Result<SimulationConfig, CliError> {
        let mut sim = self.config().simulation.clone().ok_or_else(|| missing("simulation"))?;
        if let Some(s) = self.seed {
            sim.seed = s;
        }
        if sim.trials == 0 {
            return Err(CliError::Config("simulation.trials: must be at least 1".into()));
        }
        if let Some(p) = sim.quantiles.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(CliError::Config(format!("simulation.quantiles: {p} is not a probability")));
        }
        Ok(sim)
    }

    fn solver_sweep(&self) -> Option<&Sweep> {
        self.config().solver.sweep.as_ref().or(self.config().sweep.as_ref())
    }

    fn simulation_sweep(&self) -> Option<&Sweep> {
        let sim = self.config().simulation.as_ref().and_then(|s| s.sweep.as_ref());
        sim.or(self.config().sweep.as_ref())
    }

    fn markets(&self, sweep: Option<&Sweep>) -> Result<Vec<(Point, Market)>, CliError> {
        let base = self.config().market.as_ref().ok_or_else(|| missing("market"))?;
        let axis = sweep.map(|s| s.axis);
        config::points(sweep)?
            .into_iter()
            .map(|p| Ok((p, config::build(&config::market_at(base, axis, p)?)?)))
            .collect()
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("[{section}] section is required for this command"))
}

fn axis_column(sweep: Option<&Sweep>) -> &'static str {
    sweep.map_or("point", |s| s.axis.name())
}

fn quantile_label(p: f64) -> String {
    format!("cutoff_q{}", num(p))
}

struct ModelStats {
    matched: f64,
    unmatched: f64,
    average_rank: Option<f64>,
    cutoff_mean: f64,
    cutoff_quantiles: Vec<f64>,
}

/// Cutoff statistics pooled over schools, so they line up with the pooled
/// simulated cutoffs.
fn model_stats(out: &StableOutcome, probs: &[f64]) -> Result<ModelStats, CliError> {
    let adm = out.admissions();
    let n = adm.n_schools();
    let identical = (1..n).all(|h| adm.curve(h) == adm.curve(0));
    let cutoff_quantiles = probs
        .iter()
        .map(|&p| {
            if identical {
                adm.curve(0).quantile(p).map_err(CliError::runtime)
            } else {
                Ok(pooled_quantile(|x| (0..n).map(|h| adm.value(h, x)).sum::<f64>() / n as f64, p))
            }
        })
        .collect::<Result<_, _>>()?;
    let cutoff_mean = (0..n).map(|h| adm.curve(h).mean_cutoff()).sum::<f64>() / n as f64;
    let mass = out.matched_mass();
    Ok(ModelStats {
        matched: mass.total,
        unmatched: out.matching.unmatched(),
        average_rank: out.average_rank().ok(),
        cutoff_mean,
        cutoff_quantiles,
    })
}

/// `inf { x : cdf(x) >= p }` by bisection on `[0, 1]`.
fn pooled_quantile(cdf: impl Fn(f64) -> f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    if cdf(0.0) >= p {
        return 0.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn run_solves(ctx: &Context, markets: &[(Point, Market)]) -> Result<Vec<StableOutcome>, CliError> {
    let s = &ctx.config().solver;
    let opts = s.options(ctx.trace)?;
    markets
        .par_iter()
        .map(|(_, m)| solve_stable(m, s.vacancy, s.start, &opts).map_err(CliError::runtime))
        .collect()
}

fn solve_probs(ctx: &Context) -> Vec<f64> {
    ctx.config().simulation.as_ref().map_or_else(|| vec![0.05, 0.5, 0.95], |s| s.quantiles.clone())
}

pub fn solve(ctx: &Context) -> Result<Report, CliError> {
    let sweep = ctx.solver_sweep();
    let markets = ctx.markets(sweep)?;
    let probs = solve_probs(ctx);
    let outcomes = run_solves(ctx, &markets)?;

    let mut columns: Vec<String> =
        [axis_column(sweep), "converged", "iterations", "residual", "matched", "unmatched", "average_rank", "cutoff_mean"]
            .map(String::from)
            .into();
    columns.extend(probs.iter().map(|&p| quantile_label(p)));
    let mut table = Table::new(columns);
    for ((point, _), out) in markets.iter().zip(&outcomes) {
        let st = model_stats(out, &probs)?;
        let mut row = vec![
            opt(*point),
            out.converged.to_string(),
            out.iterations.to_string(),
            num(out.residual),
            num(st.matched),
            num(st.unmatched),
            opt(st.average_rank),
            num(st.cutoff_mean),
        ];
        row.extend(st.cutoff_quantiles.iter().map(|&q| num(q)));
        table.push(row);
    }

    let mut w = ctx.writer("solve", None)?;
    w.table("solve", &table)?;
    w.json("solve.outcomes", &outcomes)?;
    if ctx.trace {
        w.table("solve.trace", &trace_table(sweep, &markets, &outcomes))?;
    }
    Ok(Report {
        files: w.finish()?,
        not_converged: outcomes.iter().filter(|o| !o.converged).count(),
        solves: outcomes.len(),
    })
}

/// Admissions on the grid after every iteration, one column per school.
fn trace_table(sweep: Option<&Sweep>, markets: &[(Point, Market)], outcomes: &[StableOutcome]) -> Table {
    let width = markets.iter().map(|(_, m)| m.n_schools()).max().unwrap_or(0);
    let names: Vec<String> = match markets {
        [(_, m)] => m.schools().to_vec(),
        _ => (0..width).map(|h| format!("school_{h}")).collect(),
    };
    let mut columns: Vec<String> = [axis_column(sweep), "iteration", "change", "p"].map(String::from).into();
    columns.extend(names.iter().map(|s| format!("A_{s}")));
    let mut table = Table::new(columns);
    for ((point, _), out) in markets.iter().zip(outcomes) {
        for step in &out.trace {
            for (i, &p) in out.grid.points().iter().enumerate() {
                let mut row = vec![opt(*point), step.iteration.to_string(), num(step.change), num(p)];
                row.extend((0..width).map(|h| step.admissions.get(h).map_or_else(|| "NA".into(), |a| num(a[i]))));
                table.push(row);
            }
        }
    }
    table
}

fn count_mode(kind: CountKind, market: &Market) -> Result<CountMode, CliError> {
    let mass = market.total_mass();
    match kind {
        CountKind::Poisson => Ok(CountMode::PoissonOf(mass)),
        CountKind::Exact => {
            if mass.fract() != 0.0 || mass < 0.0 {
                return Err(CliError::Config(format!(
                    "simulation.count: exact counts need a whole student mass, got {mass}"
                )));
            }
            Ok(CountMode::Exact(mass as usize))
        }
    }
}

fn run_simulations(
    sim: &SimulationConfig,
    markets: &[(Point, Market)],
) -> Result<Vec<AggregateReport>, CliError> {
    let spec = MetricsSpec { school_proposing: sim.school_proposing, quantiles: sim.quantiles.clone(), keep_trials: false };
    let modes = markets.iter().map(|(_, m)| count_mode(sim.count, m)).collect::<Result<Vec<_>, _>>()?;
    markets
        .iter()
        .zip(modes)
        .enumerate()
        .map(|(i, ((_, m), mode))| {
            monte_carlo(m, mode, sim.trials, trial_seed(sim.seed, i as u64), &spec).map_err(CliError::runtime)
        })
        .collect()
}

fn metric(rep: &AggregateReport, name: &str) -> (Option<f64>, Option<f64>) {
    rep.metric(name).map_or((None, None), |m| (Some(m.mean), Some(m.se)))
}

fn metric_quantile(rep: &AggregateReport, name: &str, p: f64) -> Option<f64> {
    rep.metric(name)?.quantiles.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
}

pub fn simulate(ctx: &Context) -> Result<Report, CliError> {
    let sim = ctx.simulation()?;
    let sweep = ctx.simulation_sweep();
    let markets = ctx.markets(sweep)?;
    let reports = run_simulations(&sim, &markets)?;

    let mut names = vec!["students", "matched_student_optimal", "matched_fraction", "average_rank_student_optimal"];
    if sim.school_proposing {
        names.extend(["matched_school_optimal", "average_rank_school_optimal"]);
    }
    names.push("cutoff_student_optimal");
    let mut columns = vec![axis_column(sweep).to_string()];
    for n in &names {
        columns.push(format!("{n}_mean"));
        columns.push(format!("{n}_se"));
    }
    columns.extend(sim.quantiles.iter().map(|&p| quantile_label(p)));
    let mut table = Table::new(columns);
    for ((point, _), rep) in markets.iter().zip(&reports) {
        let mut row = vec![opt(*point)];
        for n in &names {
            let (mean, se) = metric(rep, n);
            row.push(opt(mean));
            row.push(opt(se));
        }
        row.extend(sim.quantiles.iter().map(|&p| opt(metric_quantile(rep, "cutoff_student_optimal", p))));
        table.push(row);
    }

    let mut w = ctx.writer("simulate", Some(sim.seed))?;
    w.table("simulate", &table)?;
    w.json("simulate.reports", &reports)?;
    Ok(Report { files: w.finish()?, not_converged: 0, solves: 0 })
}

fn comparison_table(sweep: Option<&Sweep>) -> Table {
    Table::new([axis_column(sweep), "statistic", "model", "simulated", "simulated_se", "abs_diff", "se_diff"])
}

fn push_comparison(table: &mut Table, point: Point, name: &str, model: Option<f64>, sim: (Option<f64>, Option<f64>)) {
    let (mean, se) = sim;
    let diff = model.zip(mean).map(|(a, b)| a - b);
    let in_se = diff.zip(se).and_then(|(d, s)| (s > 0.0).then_some(d / s));
    table.push(vec![opt(point), name.into(), opt(model), opt(mean), opt(se), opt(diff.map(f64::abs)), opt(in_se)]);
}

fn same_sweep(a: Option<&Sweep>, b: Option<&Sweep>) -> Result<(), CliError> {
    if a == b {
        return Ok(());
    }
    let show = |s: Option<&Sweep>| s.map_or("none".to_string(), |s| format!("{} {:?}", s.axis.name(), s.values));
    Err(CliError::Config(format!(
        "sweep: model and simulation sweeps differ ({} vs {})",
        show(a),
        show(b)
    )))
}

pub fn compare(ctx: &Context) -> Result<Report, CliError> {
    if ctx.config().formulas.is_some() {
        return compare_formulas(ctx);
    }
    let sim = ctx.simulation()?;
    let sweep = ctx.solver_sweep();
    same_sweep(sweep, ctx.simulation_sweep())?;
    let markets = ctx.markets(sweep)?;
    let outcomes = run_solves(ctx, &markets)?;
    let reports = run_simulations(&sim, &markets)?;

    let mut table = comparison_table(sweep);
    for (((point, _), out), rep) in markets.iter().zip(&outcomes).zip(&reports) {
        let st = model_stats(out, &sim.quantiles)?;
        let p = *point;
        push_comparison(&mut table, p, "matched", Some(st.matched), metric(rep, "matched_student_optimal"));
        push_comparison(&mut table, p, "average_rank_student_optimal", st.average_rank, metric(rep, "average_rank_student_optimal"));
        if sim.school_proposing {
            push_comparison(&mut table, p, "average_rank_school_optimal", st.average_rank, metric(rep, "average_rank_school_optimal"));
        }
        push_comparison(&mut table, p, "cutoff_mean", Some(st.cutoff_mean), metric(rep, "cutoff_student_optimal"));
        for (&q, &v) in sim.quantiles.iter().zip(&st.cutoff_quantiles) {
            let empirical = metric_quantile(rep, "cutoff_student_optimal", q);
            push_comparison(&mut table, p, &quantile_label(q), Some(v), (empirical, None));
        }
    }

    let mut w = ctx.writer("compare", Some(sim.seed))?;
    w.table("compare", &table)?;
    Ok(Report {
        files: w.finish()?,
        not_converged: outcomes.iter().filter(|o| !o.converged).count(),
        solves: outcomes.len(),
    })
}

struct FormulaPoint {
    workers: usize,
    schools: usize,
    q: f64,
}

fn formula_points(f: &FormulasConfig, sweep: Option<&Sweep>) -> Result<Vec<(Point, FormulaPoint)>, CliError> {
    let axis = sweep.map(|s| s.axis);
    config::points(sweep)?
        .into_iter()
        .map(|p| {
            let mut fp = FormulaPoint { workers: f.workers, schools: f.schools.unwrap_or(0), q: f.q };
            match (axis, p) {
                (Some(Axis::Schools), Some(v)) => fp.schools = config::whole(Axis::Schools, v)?,
                (Some(Axis::Students), Some(v)) => fp.workers = config::whole(Axis::Students, v)?,
                (Some(Axis::Q), Some(v)) => fp.q = v,
                (Some(a), Some(_)) => {
                    return Err(CliError::Config(format!("sweep.axis: {} does not apply to [formulas]", a.name())))
                }
                _ => {}
            }
            if f.schools.is_none() && axis != Some(Axis::Schools) {
                return Err(CliError::Config("formulas.schools: required unless the sweep is over schools".into()));
            }
            if !(0.0..=1.0).contains(&fp.q) {
                return Err(CliError::Config(format!("formulas.q: {} is not a probability", fp.q)));
            }
            Ok((p, fp))
        })
        .collect()
}

struct Predictions {
    rsd_hat: f64,
    iid_hat: f64,
    rsd_exact: f64,
}

fn predictions(fp: &FormulaPoint) -> Result<Predictions, CliError> {
    let (w, m) = (fp.workers as f64, fp.schools as f64);
    let err = |e| CliError::config("formulas", e);
    Ok(Predictions {
        rsd_hat: v_rsd_hat(w, m, fp.q).map_err(err)?,
        iid_hat: v_iid_hat(w, m, fp.q).map_err(err)?,
        rsd_exact: v_rsd_exact(fp.workers, fp.schools, fp.q).map_err(err)?,
    })
}

pub fn formulas(ctx: &Context) -> Result<Report, CliError> {
    let f = ctx.config().formulas.as_ref().ok_or_else(|| missing("formulas"))?;
    let sweep = ctx.config().sweep.as_ref();
    let pts = formula_points(f, sweep)?;
    let mut table = Table::new(["workers", "schools", "q", "v_rsd_hat", "v_iid_hat", "v_rsd_exact"]);
    for (_, fp) in &pts {
        let pr = predictions(fp)?;
        table.push(vec![
            fp.workers.to_string(),
            fp.schools.to_string(),
            num(fp.q),
            num(pr.rsd_hat),
            num(pr.iid_hat),
            num(pr.rsd_exact),
        ]);
    }
    let mut w = ctx.writer("formulas", None)?;
    w.table("formulas", &table)?;
    Ok(Report { files: w.finish()?, not_converged: 0, solves: 0 })
}

/// Length distribution of a list that keeps each of `m` schools with
/// probability `1 - q`, conditioned on being nonempty.
fn binomial_lengths(m: usize, q: f64) -> Vec<f64> {
    if q == 0.0 {
        let mut v = vec![0.0; m];
        v[m - 1] = 1.0;
        return v;
    }
    let (lp, lq) = ((-q).ln_1p(), q.ln());
    let mut ln_choose = 0.0;
    let mut pmf: Vec<f64> = (1..=m)
        .map(|k| {
            ln_choose += ((m - k + 1) as f64).ln() - (k as f64).ln();
            (ln_choose + k as f64 * lp + (m - k) as f64 * lq).exp()
        })
        .collect();
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    pmf
}

/// Mean and standard error of matches when every student draws an
/// independent acceptable set and priorities are independent. Students with
/// empty sets never match, so each trial first draws how many are nonempty.
fn simulated_iid_matches(fp: &FormulaPoint, trials: usize, seed: u64) -> Result<(f64, f64), CliError> {
    let any = -(fp.schools as f64 * fp.q.ln()).exp_m1();
    if fp.schools == 0 || fp.workers == 0 || !(any > 0.0) {
        return Ok((0.0, 0.0));
    }
    let measure =
        TypeMeasure::SymmetricIid { total_mass: fp.workers as f64, list_length: LengthDistribution::Explicit(binomial_lengths(fp.schools, fp.q)) };
    let market = Market::uniform(fp.schools, 1, measure).map_err(CliError::runtime)?;
    let spec = MetricsSpec { school_proposing: false, quantiles: Vec::new(), keep_trials: false };
    let matches: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let k = (0..fp.workers).filter(|_| rng.random_bool(any.min(1.0))).count();
            run_trial(&market, CountMode::Exact(k), trial_seed(s, 1), &spec).map(|t| t.student_optimal.matched as f64)
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::runtime)?;
    let n = matches.len() as f64;
    let mean = matches.iter().sum::<f64>() / n;
    let var = if matches.len() > 1 { matches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok((mean, (var / n).sqrt()))
}

fn compare_formulas(ctx: &Context) -> Result<Report, CliError> {
    let f = ctx.config().formulas.as_ref().ok_or_else(|| missing("formulas"))?;
    let sim = ctx.simulation()?;
    let sweep = ctx.config().sweep.as_ref();
    same_sweep(sweep, ctx.simulation_sweep())?;
    let pts = formula_points(f, sweep)?;
    let mut table = comparison_table(sweep);
    for (i, (p, fp)) in pts.iter().enumerate() {
        let pr = predictions(fp)?;
        let (mean, se) = simulated_iid_matches(fp, sim.trials, trial_seed(sim.seed, i as u64))?;
        for (name, v) in [("v_rsd_hat", pr.rsd_hat), ("v_iid_hat", pr.iid_hat), ("v_rsd_exact", pr.rsd_exact)] {
            push_comparison(&mut table, *p, name, Some(v), (Some(mean), Some(se)));
        }
    }
    let mut w = ctx.writer("compare", Some(sim.seed))?;
    w.table("compare", &table)?;
    Ok(Report { files: w.finish()?, not_converged: 0, solves: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_lengths_normalized() {
        let pmf = binomial_lengths(10, 0.9);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // P(len = 1 | len >= 1) = 10 (0.1) 0.9^9 / (1 - 0.9^10)
        let want = 10.0 * 0.1 * 0.9f64.powi(9) / (1.0 - 0.9f64.powi(10));
        assert!((pmf[0] - want).abs() < 1e-14);
    }

    #[test]
    fn pooled_quantile_of_step() {
        let x = pooled_quantile(|x| if x > 0.3 { 1.0 } else { 0.0 }, 0.5);
        assert!((x - 0.3).abs() < 1e-12);
    }
}
