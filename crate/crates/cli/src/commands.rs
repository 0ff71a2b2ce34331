//! One runner per subcommand. Each returns an [`Outcome`]; nothing is written here.

use std::path::Path;

use anyhow::{bail, Context, Result};
use landmark_core::completeness::{classify_geodesic, estimate_gap_exponent, Geodesic};
use landmark_core::dynamics::{conserved, integrate, IntOpts, PhasePoint, Termination};
use landmark_core::geometry::{collision_bound, curve_length, escape_bound, SampledCurve};
use landmark_core::stochastic::{ce_classify, sde_coeffs, simulate_paths, CeConclusion, SimOpts};
use landmark_core::twobody::{breakdown_forecast, default_radius, laplacian_exact, simulate, TwoBodyState, Verdict};
use landmark_core::{make_kernel, Kernel64, KernelSpec};
use serde::Deserialize;
use serde_json::json;

use crate::config::{
    ClassifyParams, Figure1Params, Job, LengthParams, Params, ReproParams, SdeParams, ShootParams, TwobodyParams,
};
use crate::output::{to_value, Outcome, Table};
use crate::svg::{Plot, Series};

pub fn execute(job: &Job) -> Result<Outcome> {
    match &job.params {
        Params::Classify(p) => classify(kernel(job)?, p),
        Params::Shoot(p) => shoot(kernel(job)?, p),
        Params::Twobody(p) => twobody(kernel(job)?, p),
        Params::Sde(p) => sde(kernel(job)?, p),
        Params::Length(p) => length(kernel(job)?, p),
        Params::Figure1(p) => figure1(p),
        Params::ReproCollision(p) => repro_collision(p),
    }
}

fn kernel(job: &Job) -> Result<Kernel64> {
    Ok(make_kernel(job.kernel()?)?)
}

fn classify(k: Kernel64, p: &ClassifyParams) -> Result<Outcome> {
    let report = classify_geodesic(&k, p.a)?;
    let exponent = estimate_gap_exponent(&k).ok();
    let v = &report.criterion;
    let result = json!({
        "geodesic": report.geodesic,
        "a_used": report.a_used,
        "evidence": v.evidence,
        "exponent": exponent,
        "integral": v.status,
        "decided_by": v.decided_by,
        "tail_model": v.tail_model,
        "heuristic": report.heuristic,
    });
    let label = match report.geodesic {
        Geodesic::Complete => "geodesically complete",
        Geodesic::Incomplete => "geodesically incomplete",
        Geodesic::Inconclusive => "inconclusive",
    };
    let mut summary = format!("{}: {label} (criterion integral on (0, {}] {}", k.name(), p.a, describe_status(&v.status));
    if let Some(e) = exponent {
        summary.push_str(&format!("; gap ~ {:.4} r^{:.4}", e.d, e.gamma));
    }
    summary.push(')');
    if report.heuristic {
        summary.push_str(" [heuristic: tabulated kernel]");
    }
    Ok(Outcome {
        result,
        csv: None,
        svg: None,
        summary,
        inconclusive: report.geodesic == Geodesic::Inconclusive,
    })
}

fn describe_status(s: &landmark_core::completeness::IntegralStatus<f64>) -> String {
    use landmark_core::completeness::IntegralStatus::*;
    match s {
        Convergent(v) => format!("converges to {v:.6}"),
        Divergent => "diverges".to_string(),
        Inconclusive => "undecided".to_string(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InitFile {
    n: usize,
    d: usize,
    x: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

fn load_init(path: &Path) -> Result<PhasePoint<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let init: InitFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if init.x.len() != init.n || init.p.len() != init.n {
        bail!("init file declares n = {} but has {} positions and {} momenta", init.n, init.x.len(), init.p.len());
    }
    if init.x.iter().chain(&init.p).any(|row| row.len() != init.d) {
        bail!("every row of x and p must have d = {} entries", init.d);
    }
    Ok(PhasePoint::from_rows(&init.x, &init.p)?)
}

fn indexed(prefix: &str, n: usize, d: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).flat_map(move |i| (0..d).map(move |k| format!("{prefix}_{i}_{k}")))
}

fn shoot(k: Kernel64, p: &ShootParams) -> Result<Outcome> {
    let s0 = load_init(&p.init)?;
    let (n, d) = (s0.n(), s0.d());
    let opts = IntOpts {
        rtol: p.rtol,
        atol: p.atol,
        collision_eps: p.collision_eps,
        escape_radius: p.escape_radius,
        ..IntOpts::default()
    };
    let tr = integrate(&s0, &k, p.t_end, &opts)?;
    let m = d * (d - 1) / 2;
    let mut header = vec!["t".to_string()];
    header.extend(indexed("x", n, d));
    header.extend(indexed("p", n, d));
    header.push("H".into());
    header.extend((0..d).map(|k| format!("P_{k}")));
    header.extend((0..m).map(|k| format!("L_{k}")));
    let mut table = Table::new(header);
    for ((t, s), c) in tr.times.iter().zip(&tr.states).zip(&tr.conserved) {
        let mut row = vec![*t];
        row.extend(&s.x);
        row.extend(&s.p);
        row.push(c.h);
        row.extend(&c.p);
        row.extend(&c.l);
        table.push(row);
    }
    let stats = tr.stats();
    let result = json!({
        "n": n,
        "d": d,
        "t_end": p.t_end,
        "t_final": tr.t_final(),
        "termination": tr.termination,
        "conserved_initial": conserved(&s0, &k),
        "conserved_final": tr.conserved.last(),
        "conserved_drift": tr.conserved_drift,
        "accepted_steps": stats.accepted,
        "rejected_steps": stats.rejected,
        "rhs_evals": stats.rhs_evals,
    });
    let summary = format!(
        "{} landmarks in R^{}: {} at t = {:.6}; max relative drift {:.3e}",
        n,
        d,
        describe_termination(&tr.termination),
        tr.t_final(),
        tr.conserved_drift.max()
    );
    Ok(Outcome { result, csv: Some(table), svg: None, summary, inconclusive: false })
}

fn describe_termination(t: &Termination<f64>) -> String {
    match t {
        Termination::ReachedTEnd => "reached t_end".into(),
        Termination::Collision { pair, .. } => format!("collision of landmarks {} and {}", pair.0, pair.1),
        Termination::Escape { index, .. } => format!("landmark {index} escaped"),
        Termination::StepFailure { reason, .. } => format!("step failure ({reason})"),
    }
}

fn twobody(k: Kernel64, p: &TwobodyParams) -> Result<Outcome> {
    let v = if p.v.is_empty() { vec![0.0; p.u.len()] } else { p.v.clone() };
    let tb = TwoBodyState::new(p.u.clone(), p.q.clone(), v, p.p.clone())?;
    let d = tb.d();
    if !p.simulate {
        let f = breakdown_forecast(&tb, &k)?;
        let summary = format!(
            "D = {:.6e}, omega = {:.6e}: {}{}{}",
            f.d,
            f.omega,
            match f.verdict {
                Verdict::GlobalExistence => "global existence",
                Verdict::FiniteTimeCollision => "finite-time collision",
                Verdict::Inconclusive => "inconclusive",
            },
            f.bound.map(|b| format!(", separation stays >= {b:.6e}")).unwrap_or_default(),
            f.predicted_t.map(|t| format!(", collision at T = {t:.6}")).unwrap_or_default(),
        );
        return Ok(Outcome {
            result: to_value(&f)?,
            csv: None,
            svg: None,
            summary,
            inconclusive: f.verdict == Verdict::Inconclusive,
        });
    }
    let tr = simulate(&tb, &k, p.t_end, &IntOpts::default())?;
    let mut header = vec!["t".to_string()];
    for name in ["u", "Q", "v", "P"] {
        header.extend((0..d).map(|c| format!("{name}_{c}")));
    }
    header.extend(["r", "D", "omega"].map(String::from));
    let mut table = Table::new(header);
    for ((t, s), inv) in tr.times.iter().zip(&tr.states).zip(&tr.invariants) {
        let mut row = vec![*t];
        row.extend(&s.u);
        row.extend(&s.q);
        row.extend(&s.v);
        row.extend(&s.p);
        row.extend([s.r(), inv.d, inv.omega]);
        table.push(row);
    }
    let t_final = tr.times.last().copied().unwrap_or(0.0);
    let result = json!({
        "invariants": tr.invariants.first(),
        "drift": tr.drift,
        "min_r": tr.min_r,
        "t_final": t_final,
        "termination": tr.termination,
        "final_state": tr.states.last(),
    });
    let summary = format!(
        "{} at t = {:.6}; min separation {:.6e}; invariant drift D {:.3e}, omega {:.3e}",
        describe_termination(&tr.termination),
        t_final,
        tr.min_r,
        tr.drift.d,
        tr.drift.omega
    );
    Ok(Outcome { result, csv: Some(table), svg: None, summary, inconclusive: false })
}

fn sde(k: Kernel64, p: &SdeParams) -> Result<Outcome> {
    let coeffs = sde_coeffs(&k, p.d)?;
    let opts = |eps_hit| SimOpts { dt: p.dt, horizon: p.horizon, n_paths: p.paths, seed: p.seed, eps_hit };
    let est = simulate_paths(&coeffs, p.r0, &opts(p.eps_hit))?;
    let mut table = Table::new(["eps_hit", "n_paths", "n_hits", "p_hat", "ci95_lo", "ci95_hi"].map(String::from).to_vec());
    let mut runs = vec![est.clone()];
    if p.sensitivity {
        for eps in [1e-3, 1e-4, 1e-5] {
            if eps != p.eps_hit {
                runs.push(simulate_paths(&coeffs, p.r0, &opts(eps))?);
            }
        }
        runs.sort_by(|a, b| b.eps_hit.total_cmp(&a.eps_hit));
    }
    for e in &runs {
        table.push(vec![e.eps_hit, e.n_paths as f64, e.n_hits as f64, e.p_hat, e.ci95.0, e.ci95.1]);
    }
    let mut result = json!({ "estimate": est, "heuristic": p.d != 2 });
    let mut summary = format!(
        "{} d={}: {} of {} paths reached r <= {} by t = {} (p_hat = {:.4}, 95% CI [{:.4}, {:.4}])",
        k.name(),
        p.d,
        est.n_hits,
        est.n_paths,
        est.eps_hit,
        est.horizon,
        est.p_hat,
        est.ci95.0,
        est.ci95.1
    );
    if p.sensitivity {
        result["sensitivity"] = to_value(&runs)?;
    }
    let mut inconclusive = false;
    if p.ce {
        let a = p.a.unwrap_or_else(|| default_radius(&k));
        let ce = ce_classify(&k, p.d, a)?;
        inconclusive = ce.conclusion == CeConclusion::Inconclusive;
        summary.push_str(&format!("; integral test on (0, {a}]: {:?}", ce.conclusion));
        result["ce"] = to_value(&ce)?;
    }
    Ok(Outcome { result, csv: Some(table), svg: None, summary, inconclusive })
}

/// Reads `t, x_i_k` columns; `n` and `d` come from the header.
fn load_curve(path: &Path) -> Result<SampledCurve<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("t") {
        bail!("{}: first column must be `t`", path.display());
    }
    let mut idx = Vec::new();
    for name in header.iter().skip(1) {
        let parts: Vec<&str> = name.split('_').collect();
        match parts.as_slice() {
            ["x", i, k] => idx.push((i.parse::<usize>()?, k.parse::<usize>()?)),
            _ => bail!("{}: unexpected column `{name}`, expected x_i_k", path.display()),
        }
    }
    let n = idx.iter().map(|p| p.0 + 1).max().unwrap_or(0);
    let d = idx.iter().map(|p| p.1 + 1).max().unwrap_or(0);
    if n * d != idx.len() {
        bail!("{}: columns do not form a complete n x d grid", path.display());
    }
    let mut times = Vec::new();
    let mut points = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}: row {}", path.display(), line + 2))?;
        if vals.len() != idx.len() + 1 {
            bail!("{}: row {} has {} fields", path.display(), line + 2, vals.len());
        }
        let mut x = vec![0.0; n * d];
        for (&(i, k), v) in idx.iter().zip(&vals[1..]) {
            x[i * d + k] = *v;
        }
        times.push(vals[0]);
        points.push(x);
    }
    Ok(SampledCurve::new(n, d, times, points)?)
}

fn refine(c: &SampledCurve<f64>, m: usize) -> Result<SampledCurve<f64>> {
    if m == 1 {
        return Ok(c.clone());
    }
    let mut times = vec![c.times[0]];
    let mut points = vec![c.points[0].clone()];
    for w in 0..c.len() - 1 {
        let (t0, t1) = (c.times[w], c.times[w + 1]);
        let (a, b) = (&c.points[w], &c.points[w + 1]);
        for j in 1..=m {
            let s = j as f64 / m as f64;
            times.push(t0 + s * (t1 - t0));
            points.push(a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect());
        }
    }
    Ok(SampledCurve::new(c.n(), c.d(), times, points)?)
}

fn length(k: Kernel64, p: &LengthParams) -> Result<Outcome> {
    let curve = refine(&load_curve(&p.curve)?, p.refine)?;
    let len = curve_length(&curve, &k)?;
    let mut result = json!({
        "n": curve.n(),
        "d": curve.d(),
        "samples": curve.len(),
        "refine": p.refine,
        "length": len,
    });
    let mut summary = format!("length {len:.8}");
    if let Some(pair) = &p.pair {
        let b = collision_bound(&curve, pair[0], pair[1], &k)?;
        result["collision_bound"] = json!({ "i": pair[0], "j": pair[1], "bound": b });
        summary.push_str(&format!("; collision bound ({}, {}) {b:.8}", pair[0], pair[1]));
    }
    if let Some(i) = p.escape {
        let b = escape_bound(&curve, i, &k)?;
        result["escape_bound"] = json!({ "i": i, "bound": b });
        summary.push_str(&format!("; escape bound ({i}) {b:.8}"));
    }
    Ok(Outcome { result, csv: None, svg: None, summary, inconclusive: false })
}

fn figure1(p: &Figure1Params) -> Result<Outcome> {
    let kernels = [
        (make_kernel::<f64>(&KernelSpec::Laplacian)?, "exp(-r)"),
        (make_kernel::<f64>(&KernelSpec::C1Bessel)?, "2(1+r)exp(-r)"),
    ];
    let rs: Vec<f64> = (0..p.samples).map(|j| p.r_max * j as f64 / (p.samples - 1) as f64).collect();
    let mut table = Table::new(vec!["r".into(), "laplacian".into(), "c1_bessel".into()]);
    for &r in &rs {
        table.push(vec![r, kernels[0].0.eval(r), kernels[1].0.eval(r)]);
    }
    let mut info = Vec::new();
    let mut series = Vec::new();
    for (j, (k, formula)) in kernels.iter().enumerate() {
        let report = classify_geodesic(k, 1.0)?;
        info.push(json!({
            "name": k.name(),
            "formula": formula,
            "K0": k.k0(),
            "geodesic": report.geodesic,
        }));
        series.push(Series {
            label: format!("K(r) = {formula}"),
            points: rs.iter().zip(&table.rows).map(|(&r, row)| (r, row[j + 1])).collect(),
            dashed: j == 1,
        });
    }
    let plot = Plot { title: "Radial kernels".into(), x_label: "r".into(), y_label: "K(r)".into(), series };
    let result = json!({ "r_max": p.r_max, "samples": p.samples, "kernels": info });
    let summary = format!("sampled exp(-r) and 2(1+r)exp(-r) at {} points on [0, {}]", p.samples, p.r_max);
    Ok(Outcome { result, csv: Some(table), svg: Some(plot.render()), summary, inconclusive: false })
}

fn repro_collision(p: &ReproParams) -> Result<Outcome> {
    let k = make_kernel::<f64>(&KernelSpec::Laplacian)?;
    let (b, t_c) = (p.b, p.t_collide);
    let s0 = laplacian_exact(b, t_c, 0.0)?;
    let opts = IntOpts { collision_eps: p.collision_eps, ..IntOpts::default() };
    let tr = integrate(&s0, &k, 2.0 * t_c, &opts)?;
    let t_event = match tr.termination {
        Termination::Collision { t_event, .. } => t_event,
        ref t => bail!("expected a collision, integration ended with {}", describe_termination(t)),
    };
    // 2 log cosh(b (T - t)) = eps at the threshold crossing
    let lead = (p.collision_eps / 2.0).exp().acosh() / b;
    let t_collision = t_event + lead;

    let (mut err_x, mut err_p) = (0.0f64, 0.0f64);
    let horizon = (t_c - 1e-3).min(t_event);
    for (t, s) in tr.times.iter().zip(&tr.states).filter(|(t, _)| **t <= horizon) {
        let ex = laplacian_exact(b, t_c, *t)?;
        for j in 0..2 {
            err_x = err_x.max((s.x[j] - ex.x[j]).abs());
            err_p = err_p.max((s.p[j] - ex.p[j]).abs() / ex.p[j].abs());
        }
    }

    let header = ["t", "x_0_0", "x_1_0", "p_0_0", "p_1_0", "r", "r_exact"].map(String::from).to_vec();
    let mut table = Table::new(header);
    for j in 0..p.samples {
        let t = t_event * j as f64 / (p.samples - 1) as f64;
        let s = tr.state_at(t).context("dense output out of range")?;
        let r_exact = if t < t_c { 2.0 * laplacian_exact(b, t_c, t)?.x[0] } else { 0.0 };
        table.push(vec![t, s.x[0], s.x[1], s.p[0], s.p[1], s.x[0] - s.x[1], r_exact]);
    }
    let series = vec![
        Series { label: "integrated".into(), points: table.rows.iter().map(|r| (r[0], r[5])).collect(), dashed: false },
        Series { label: "closed form".into(), points: table.rows.iter().map(|r| (r[0], r[6])).collect(), dashed: true },
    ];
    let plot = Plot {
        title: format!("Head-on collision, laplacian kernel, b = {b}, T = {t_c}"),
        x_label: "t".into(),
        y_label: "separation r(t)".into(),
        series,
    };
    let result = json!({
        "t_collision": t_collision,
        "t_collision_exact": t_c,
        "t_event": t_event,
        "collision_eps": p.collision_eps,
        "max_position_error": err_x,
        "max_momentum_rel_error": err_p,
        "error_horizon": horizon,
        "conserved_drift": tr.conserved_drift,
    });
    let summary = format!(
        "collision at t = {t_collision:.9} (exact {t_c}); threshold crossed at {t_event:.9}; max position error {err_x:.3e}"
    );
    Ok(Outcome { result, csv: Some(table), svg: Some(plot.render()), summary, inconclusive: false })
}
