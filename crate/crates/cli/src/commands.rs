//! Command implementations. Each returns a JSON summary and an exit status; files are
//! written under the output directory when one is given.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use riskshare_core::allocate::{
    comonotonic_allocation, comonotonic_improvement, iqd_allocation, is_comonotonic,
    mixed_allocation, tail_assignment, validate_scenario, welfare, IqdOptions, MixedOptions,
    Region,
};
use riskshare_core::beliefs::comonotonic_allocation_with_beliefs;
use riskshare_core::infconv::{infconv_comonotonic, infconv_iqd, infconv_mixed, welfare_gap};
use riskshare_core::io::{read_allocation_csv, write_allocation_csv};
use riskshare_core::verify::{dominance_check, pareto_check, sample_allocations, SampleMode};
use riskshare_core::{
    envelope_min, Allocation, DistortionFunction, Error, InfconvResult, Regime, Role,
    VerificationReport,
};
use serde_json::{json, Value};

use crate::scenario::{Mode, Scenario};
use crate::CliError;

pub struct Outcome {
    pub summary: Value,
    pub status: i32,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Outcome { summary, status: 0 }
    }
}

fn write_out(out: Option<&Path>, name: &str, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn column_name(name: &Option<String>, i: usize) -> String {
    name.clone()
        .unwrap_or_else(|| format!("agent{}", i + 1))
        .replace([',', '"', '\n'], "_")
}

/// The representative distortion of the scenario's mode and its value at `X`.
fn representative(sc: &Scenario) -> Result<(DistortionFunction, &'static str, f64), CliError> {
    let hs: Vec<DistortionFunction> = sc.agents.iter().map(|a| a.distortion.clone()).collect();
    let r: InfconvResult = match sc.mode {
        Mode::Comonotonic if sc.has_beliefs() => {
            let out = comonotonic_allocation_with_beliefs(&sc.x, &sc.agents, sc.tie)?;
            let weighted: Vec<DistortionFunction> = out
                .transformed
                .iter()
                .zip(&sc.agents)
                .map(|(g, a)| g.scale(a.weight))
                .collect();
            return Ok((
                envelope_min(&weighted)?,
                "comonotonic-beliefs",
                out.representative_value,
            ));
        }
        Mode::Comonotonic => infconv_comonotonic(&hs, &sc.lambdas())?,
        Mode::Unconstrained => {
            no_beliefs(sc)?;
            infconv_iqd(&iqd_levels(sc)?, &sc.lambdas())?
        }
        Mode::Mixed => {
            no_beliefs(sc)?;
            infconv_mixed(&sc.agents)?
        }
    };
    let name = match r.regime {
        Regime::ComonotonicEnvelope => "comonotonic",
        Regime::IqdUnconstrained => "iqd-unconstrained",
        Regime::MixedUnconstrained => "mixed-unconstrained",
    };
    let v = r.value_at(&sc.x);
    Ok((r.representative, name, v))
}

fn no_beliefs(sc: &Scenario) -> Result<(), CliError> {
    if sc.has_beliefs() {
        return Err(Error::UnsupportedRegime(
            "beliefs are supported in comonotonic mode only".into(),
        )
        .into());
    }
    Ok(())
}

fn iqd_levels(sc: &Scenario) -> Result<Vec<f64>, CliError> {
    sc.iqd_levels().ok_or_else(|| {
        Error::UnsupportedRegime(
            "unconstrained mode needs IQD agents only; use mixed mode for concave agents".into(),
        )
        .into()
    })
}

struct Solution {
    allocation: Allocation,
    regions: Option<Vec<Region>>,
    value: f64,
    representative_value: f64,
    c: Option<f64>,
}

fn solve(sc: &Scenario) -> Result<Solution, CliError> {
    match sc.mode {
        Mode::Comonotonic if sc.has_beliefs() => {
            let out = comonotonic_allocation_with_beliefs(&sc.x, &sc.agents, sc.tie)?;
            Ok(Solution {
                allocation: out.allocation,
                regions: None,
                value: out.value,
                representative_value: out.representative_value,
                c: None,
            })
        }
        Mode::Comonotonic => {
            let (allocation, value) = comonotonic_allocation(&sc.x, &sc.agents, sc.tie)?;
            let (_, _, rep) = representative(sc)?;
            Ok(Solution {
                allocation,
                regions: None,
                value,
                representative_value: rep,
                c: None,
            })
        }
        Mode::Unconstrained => {
            no_beliefs(sc)?;
            let opts = IqdOptions {
                c: sc.c,
                cs: sc.cs.clone(),
                weights: sc.weights.clone(),
            };
            let out = iqd_allocation(&sc.x, &iqd_levels(sc)?, &sc.lambdas(), &opts)?;
            let (_, _, rep) = representative(sc)?;
            Ok(Solution {
                regions: Some(out.tails.regions(sc.x.len())),
                allocation: out.allocation,
                value: out.value,
                representative_value: rep,
                c: Some(out.c),
            })
        }
        Mode::Mixed => {
            no_beliefs(sc)?;
            let opts = MixedOptions {
                c: sc.c,
                cs: sc.cs.clone(),
            };
            let out = mixed_allocation(&sc.x, &sc.agents, sc.tie, &opts)?;
            Ok(Solution {
                regions: Some(out.tails.regions(sc.x.len())),
                allocation: out.allocation,
                value: out.value,
                representative_value: out.representative_value,
                c: Some(out.c),
            })
        }
    }
}

fn agents_json(sc: &Scenario, values: &[f64]) -> Value {
    Value::Array(
        sc.agents
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (a, v))| {
                json!({
                    "agent": i + 1,
                    "name": column_name(&a.name, i),
                    "weight": a.weight,
                    "value": v,
                    "weighted": a.weight * v,
                })
            })
            .collect(),
    )
}

/// Riskmetric of the total for every agent.
pub fn eval(sc: &Scenario, out: Option<&Path>) -> Result<Outcome, CliError> {
    let values = sc
        .agents
        .iter()
        .map(|a| a.evaluate(sc.x.values()))
        .collect::<riskshare_core::Result<Vec<f64>>>()?;
    let mut csv = String::from("agent,name,weight,value,weighted\n");
    for (i, (a, v)) in sc.agents.iter().zip(&values).enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{}",
            i + 1,
            column_name(&a.name, i),
            a.weight,
            v,
            a.weight * v
        )
        .unwrap();
    }
    write_out(out, "eval.csv", &csv)?;
    Ok(Outcome::ok(json!({
        "command": "eval",
        "states": sc.x.len(),
        "agents": agents_json(sc, &values),
    })))
}

/// Sign and level checks of `h_i(1)`, role checks for the mode and grid integrality.
pub fn validate(sc: &Scenario, out: Option<&Path>) -> Result<Outcome, CliError> {
    let report = validate_scenario(&sc.agents);
    let mut status = if report.passed() { 0 } else { 2 };
    let mut checks = Vec::new();
    let mut check = |name: &str, r: Result<(), CliError>| {
        let (ok, message, code) = match r {
            Ok(()) => (true, String::new(), 0),
            Err(e) => (false, e.to_string(), e.exit_code()),
        };
        if !ok && status == 0 {
            status = code;
        }
        checks.push(json!({ "check": name, "ok": ok, "message": message }));
    };
    match sc.mode {
        Mode::Comonotonic => {}
        Mode::Unconstrained => {
            check("roles", iqd_levels(sc).map(|_| ()));
            if let Some(alphas) = sc.iqd_levels() {
                check(
                    "grid",
                    tail_assignment(&sc.x, &alphas)
                        .map(|_| ())
                        .map_err(Into::into),
                );
            }
        }
        Mode::Mixed => {
            check(
                "roles",
                infconv_mixed(&sc.agents).map(|_| ()).map_err(Into::into),
            );
            let alphas: Vec<f64> = sc
                .agents
                .iter()
                .map(|a| {
                    if let Role::Iqd(al) = a.role() {
                        al
                    } else {
                        0.0
                    }
                })
                .collect();
            check(
                "grid",
                tail_assignment(&sc.x, &alphas)
                    .map(|_| ())
                    .map_err(Into::into),
            );
        }
    }
    if sc.has_beliefs() {
        check("beliefs", no_beliefs_outside_comonotonic(sc));
    }
    let summary = json!({
        "command": "validate",
        "passed": status == 0,
        "report": report,
        "checks": checks,
    });
    write_out(
        out,
        "validate.json",
        &format!("{}\n", serde_json::to_string_pretty(&summary).unwrap()),
    )?;
    Ok(Outcome { summary, status })
}

fn no_beliefs_outside_comonotonic(sc: &Scenario) -> Result<(), CliError> {
    match sc.mode {
        Mode::Comonotonic => Ok(()),
        _ => no_beliefs(sc),
    }
}

/// Representative distortion of the inf-convolution and its value at `X`.
pub fn infconv(sc: &Scenario, out: Option<&Path>) -> Result<Outcome, CliError> {
    let (h, regime, value) = representative(sc)?;
    write_out(out, "representative.csv", &h.to_record())?;
    Ok(Outcome::ok(json!({
        "command": "infconv",
        "regime": regime,
        "value": value,
        "representative": h,
    })))
}

/// Optimal allocation for the mode, its welfare and the representative value.
pub fn allocate(sc: &Scenario, out: Option<&Path>) -> Result<Outcome, CliError> {
    let sol = solve(sc)?;
    let (values, total) = welfare(&sol.allocation, &sc.agents)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let f = fs::File::create(dir.join("allocation.csv"))?;
        write_allocation_csv(f, &sol.allocation, sol.regions.as_deref())?;
    }
    let summary = json!({
        "command": "allocate",
        "mode": sc.mode,
        "agents": agents_json(sc, &values),
        "welfare": total,
        "value": sol.value,
        "representative_value": sol.representative_value,
        "c": sol.c,
        "comonotonic": is_comonotonic(&sol.allocation),
    });
    write_out(
        out,
        "welfare.json",
        &format!("{}\n", serde_json::to_string_pretty(&summary).unwrap()),
    )?;
    Ok(Outcome::ok(summary))
}

fn read_allocation(path: &Path) -> Result<Allocation, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(read_allocation_csv(f)?)
}

/// Comonotonic improvement of an allocation read from CSV.
pub fn improve(
    sc: Option<&Scenario>,
    allocation: &Path,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let a = read_allocation(allocation)?;
    let b = comonotonic_improvement(&a);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_allocation_csv(fs::File::create(dir.join("improved.csv"))?, &b, None)?;
    }
    let mut summary = json!({
        "command": "improve",
        "input_comonotonic": is_comonotonic(&a),
        "output_comonotonic": is_comonotonic(&b),
        "changed": a != b,
    });
    if let Some(sc) = sc.filter(|sc| sc.agents.len() == a.n_agents()) {
        let (before, wb) = welfare(&a, &sc.agents)?;
        let (after, wa) = welfare(&b, &sc.agents)?;
        summary["before"] = json!({ "agents": before, "welfare": wb });
        summary["after"] = json!({ "agents": after, "welfare": wa });
    }
    Ok(Outcome::ok(summary))
}

fn report_json(r: &VerificationReport) -> Value {
    json!({
        "trials": r.trials,
        "violations": r.violations,
        "worst_gap": if r.worst_gap.is_finite() { json!(r.worst_gap) } else { Value::Null },
        "passed": r.passed(),
        "witnesses": r.witnesses.len(),
    })
}

/// Dominance of the closed form over random allocations, plus a Pareto check of a
/// given allocation.
pub fn verify(
    sc: &Scenario,
    allocation: Option<&Path>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let mut text = String::new();
    let mut summary =
        json!({ "command": "verify", "seed": sc.seed, "trials": sc.trials, "tol": sc.tol });
    let mut passed = true;

    let dominance = if sc.has_beliefs() {
        // closed form under the common measure against comonotonic samples
        let sol = solve(sc)?;
        let abs_tol = sc.tol * sol.value.abs().max(1.0);
        let mut r = VerificationReport {
            trials: 0,
            violations: 0,
            worst_gap: f64::INFINITY,
            witnesses: Vec::new(),
        };
        for a in sample_allocations(
            &sc.x,
            sc.agents.len(),
            SampleMode::Comonotonic,
            sc.trials,
            sc.seed,
        ) {
            let gap = welfare(&a, &sc.agents)?.1 - sol.value;
            r.trials += 1;
            r.worst_gap = r.worst_gap.min(gap);
            if gap < -abs_tol {
                r.violations += 1;
            }
        }
        r
    } else {
        let hs: Vec<DistortionFunction> = sc.agents.iter().map(|a| a.distortion.clone()).collect();
        let closed = match sc.mode {
            Mode::Comonotonic => infconv_comonotonic(&hs, &sc.lambdas())?,
            Mode::Unconstrained => infconv_iqd(&iqd_levels(sc)?, &sc.lambdas())?,
            Mode::Mixed => infconv_mixed(&sc.agents)?,
        };
        dominance_check(&sc.x, &sc.agents, &closed, sc.trials, sc.seed, sc.tol)?
    };
    passed &= dominance.passed();
    writeln!(text, "[dominance]\n{dominance}").unwrap();
    summary["dominance"] = report_json(&dominance);

    if let Some(path) = allocation {
        let a = read_allocation(path)?;
        let (values, total) = welfare(&a, &sc.agents)?;
        summary["allocation"] = json!({ "agents": agents_json(sc, &values), "welfare": total });
        let modes = match sc.mode {
            Mode::Comonotonic => vec![SampleMode::Comonotonic],
            _ => vec![
                SampleMode::Comonotonic,
                SampleMode::Unconstrained,
                SampleMode::TailRandomized,
            ],
        };
        let per = sc.trials.div_ceil(modes.len());
        let candidates = modes
            .iter()
            .enumerate()
            .flat_map(|(k, &m)| {
                sample_allocations(
                    &sc.x,
                    a.n_agents(),
                    m,
                    per,
                    sc.seed.wrapping_add(k as u64 + 1),
                )
                .collect::<Vec<_>>()
            })
            .chain(std::iter::once(comonotonic_improvement(&a)));
        let pareto = pareto_check(&a, &sc.agents, candidates, sc.tol)?;
        passed &= pareto.passed();
        writeln!(text, "[pareto]\n{pareto}").unwrap();
        summary["pareto"] = report_json(&pareto);
    }
    summary["passed"] = json!(passed);
    write_out(out, "verify.txt", &text)?;
    write_out(
        out,
        "verify.json",
        &format!("{}\n", serde_json::to_string_pretty(&summary).unwrap()),
    )?;
    Ok(Outcome {
        summary,
        status: if passed { 0 } else { 2 },
    })
}

fn curve_csv(header: &str, ts: &[f64], curves: &[&DistortionFunction]) -> String {
    let mut s = format!("{header}\n");
    for &t in ts {
        write!(s, "{t}").unwrap();
        for h in curves {
            write!(s, ",{}", h.at(t)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Curve data: distortions, weighted distortions, the representative distortion and
/// the transfer functions `x -> f_i(x)` of the optimal allocation.
pub fn plot(sc: &Scenario, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = out.ok_or_else(|| CliError::Parse("plot needs --out".into()))?;
    let p = sc.plot_points;
    let ts: Vec<f64> = (0..p).map(|k| k as f64 / (p - 1) as f64).collect();
    let names: Vec<String> = sc
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| column_name(&a.name, i))
        .collect();
    let header = format!("t,{}", names.join(","));

    let hs: Vec<&DistortionFunction> = sc.agents.iter().map(|a| &a.distortion).collect();
    write_out(Some(out), "distortions.csv", &curve_csv(&header, &ts, &hs))?;
    let weighted: Vec<DistortionFunction> =
        sc.agents.iter().map(|a| a.weighted_distortion()).collect();
    let wr: Vec<&DistortionFunction> = weighted.iter().collect();
    write_out(Some(out), "weighted.csv", &curve_csv(&header, &ts, &wr))?;
    let (rep, regime, value) = representative(sc)?;
    write_out(
        Some(out),
        "representative.csv",
        &curve_csv("t,value", &ts, &[&rep]),
    )?;

    let sol = solve(sc)?;
    let x = sc.x.values();
    let mut s = format!("x,{}\n", names.join(","));
    for st in sc.x.ascending_order() {
        write!(s, "{}", x[st]).unwrap();
        for part in sol.allocation.parts() {
            write!(s, ",{}", part[st]).unwrap();
        }
        s.push('\n');
    }
    write_out(Some(out), "transfer.csv", &s)?;
    Ok(Outcome::ok(json!({
        "command": "plot",
        "regime": regime,
        "value": value,
        "files": ["distortions.csv", "weighted.csv", "representative.csv", "transfer.csv"],
        "points": p,
    })))
}

/// Comonotonic minus unconstrained optimum for IQD agents.
pub fn gap(sc: &Scenario, out: Option<&Path>) -> Result<Outcome, CliError> {
    no_beliefs(sc)?;
    let alphas = sc.iqd_levels().ok_or_else(|| {
        Error::UnsupportedRegime("the welfare gap is defined for IQD agents".into())
    })?;
    let lambdas = sc.lambdas();
    let g = welfare_gap(&sc.x, &alphas, &lambdas)?;
    let unconstrained = infconv_iqd(&alphas, &lambdas)?.value_at(&sc.x);
    write_out(
        out,
        "gap.csv",
        &format!(
            "comonotonic,unconstrained,gap\n{},{},{}\n",
            unconstrained + g,
            unconstrained,
            g
        ),
    )?;
    Ok(Outcome::ok(json!({
        "command": "gap",
        "comonotonic": unconstrained + g,
        "unconstrained": unconstrained,
        "gap": g,
    })))
}
