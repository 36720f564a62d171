//! Self-verification suites behind `orderk verify`. Each suite emits typed
//! check rows; a run passes when no asserted row fails. Informational rows
//! report expected divergences without affecting the exit status.

use serde::Serialize;
use serde_json::json;

use orderk::exactdist::{jump_law_u, jump_law_w, jump_law_y, jump_law_z, pgf_y, pmf_table_y};
use orderk::hitting::{
    closed_form_hit_prob_u, closed_form_hit_prob_w, closed_form_hit_prob_y, closed_form_hit_prob_z,
    hit_prob_by_last_jump, hit_prob_by_recursion, iterated_hit_prob_general, mc_hit_prob,
    visit_probabilities, HitQuery, CLOSED_FORM_RECURSION_TOL,
};
use orderk::params::{OrderParams, WeightTable};
use orderk::simulate::{run_terminal_histogram, Process, SampleMode, SimConfig};
use orderk::stats::chi_square_two_sample;
use orderk::subordinators::{laplace_transform_mc, BernsteinFn};

use crate::commands::{
    run_hit, run_pmf, run_simulate, Execution, HitArgs, ModeArg, OutputArgs, PmfArgs, ProcessKind,
    ProcessSpec, SimulateArgs, SuiteName, VerifyArgs,
};
use crate::manifest::{sha256_hex, SCHEMA_VERSION};
use crate::output::{csv_text, fmt_f, json_bytes, Format};

const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    suite: &'static str,
    name: String,
    /// Comparison shape: abs (|value - expected| <= tolerance), ge, le, or
    /// info.
    kind: &'static str,
    status: &'static str,
    value: f64,
    expected: f64,
    tolerance: f64,
    detail: String,
}

impl CheckRow {
    fn abs(
        suite: &'static str,
        name: String,
        value: f64,
        expected: f64,
        tolerance: f64,
        detail: String,
    ) -> Self {
        let pass = (value - expected).abs() <= tolerance;
        Self {
            suite,
            name,
            kind: "abs",
            status: if pass { "pass" } else { "fail" },
            value,
            expected,
            tolerance,
            detail,
        }
    }

    fn ge(suite: &'static str, name: String, value: f64, floor: f64, detail: String) -> Self {
        Self {
            suite,
            name,
            kind: "ge",
            status: if value >= floor { "pass" } else { "fail" },
            value,
            expected: floor,
            tolerance: 0.0,
            detail,
        }
    }

    fn le(suite: &'static str, name: String, value: f64, ceiling: f64, detail: String) -> Self {
        Self {
            suite,
            name,
            kind: "le",
            status: if value <= ceiling { "pass" } else { "fail" },
            value,
            expected: ceiling,
            tolerance: 0.0,
            detail,
        }
    }

    fn info(suite: &'static str, name: String, value: f64, expected: f64, detail: String) -> Self {
        Self {
            suite,
            name,
            kind: "info",
            status: "info",
            value,
            expected,
            tolerance: 0.0,
            detail,
        }
    }

    fn is_fail(&self) -> bool {
        self.status == "fail"
    }

    fn is_checked(&self) -> bool {
        self.status != "info"
    }
}

#[derive(Serialize)]
struct SuiteReport {
    schema_version: u32,
    suite: String,
    seed: u64,
    n_checks: u64,
    n_failed: u64,
    rows: Vec<CheckRow>,
}

// ---------------------------------------------------------------------------
// exact laws

fn suite_exact() -> anyhow::Result<Vec<CheckRow>> {
    const S: &str = "exact";
    let mut rows = Vec::new();
    for i in [1u32, 2, 3, 5] {
        for lt in [0.5f64, 1.0, 3.0] {
            let p = OrderParams::new(i, lt, 1.0)?;
            let table = pmf_table_y(&p, 1e-9)?;
            let tag = format!("y i={i} rate_time={lt}");

            rows.push(CheckRow::ge(
                S,
                format!("{tag} covered mass floor"),
                table.mass(),
                1.0 - 1e-9,
                String::new(),
            ));
            rows.push(CheckRow::le(
                S,
                format!("{tag} covered mass ceiling"),
                table.mass(),
                1.0,
                String::new(),
            ));

            let mut worst = 0.0f64;
            for u in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let direct = pgf_y(&p, u)?;
                // Horner evaluation of the tabulated mass series.
                let mut series = 0.0;
                for n in (0..=table.n_max()).rev() {
                    series = series * u + table.prob(n);
                }
                worst = worst.max((direct - series).abs());
            }
            rows.push(CheckRow::abs(
                S,
                format!("{tag} generating function vs mass series"),
                worst,
                0.0,
                1e-8,
                "max over u in 0.1..0.9".to_string(),
            ));

            let mean_exact = lt * f64::from(i) * f64::from(i + 1) / 2.0;
            let var_exact = lt * f64::from(i) * f64::from(i + 1) * f64::from(2 * i + 1) / 6.0;
            rows.push(CheckRow::abs(
                S,
                format!("{tag} mean relative error"),
                (table.mean() - mean_exact).abs() / mean_exact,
                0.0,
                1e-6,
                format!("closed form {}", fmt_f(mean_exact)),
            ));
            rows.push(CheckRow::abs(
                S,
                format!("{tag} variance relative error"),
                (table.variance() - var_exact).abs() / var_exact,
                0.0,
                1e-6,
                format!("closed form {}", fmt_f(var_exact)),
            ));
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// sampler representations

type Sampler<'a> = (&'a Process, SampleMode);

fn two_sample_p(a: Sampler, b: Sampler, seed: u64, paths: u64) -> anyhow::Result<f64> {
    let cfg_a = SimConfig::new(paths, seed, 4, a.0.params().t())?;
    let cfg_b = SimConfig::new(paths, seed.wrapping_add(7_777), 4, b.0.params().t())?;
    let ha = run_terminal_histogram(a.0, a.1, &cfg_a)?;
    let hb = run_terminal_histogram(b.0, b.1, &cfg_b)?;
    Ok(chi_square_two_sample(&ha, &hb, 5.0)?.p_value)
}

/// One chance-rejection is tolerated: a rejecting first attempt is rerun
/// once with fresh seeds and only a second rejection fails the row.
fn same_law_row(
    suite: &'static str,
    name: String,
    a: Sampler,
    b: Sampler,
    seed: u64,
    paths: u64,
) -> anyhow::Result<CheckRow> {
    let first = two_sample_p(a, b, seed, paths)?;
    if first >= SIGNIFICANCE {
        return Ok(CheckRow::ge(
            suite,
            name,
            first,
            SIGNIFICANCE,
            "p value of the first attempt".to_string(),
        ));
    }
    let second = two_sample_p(a, b, seed.wrapping_add(1000), paths)?;
    Ok(CheckRow::ge(
        suite,
        name,
        second,
        SIGNIFICANCE,
        format!("reseeded once after p={first:.4}"),
    ))
}

fn suite_compound(seed: u64, paths: u64) -> anyhow::Result<Vec<CheckRow>> {
    const S: &str = "compound";
    let mut rows = Vec::new();

    let y = Process::y(OrderParams::new(3, 1.0, 1.0)?);
    let z = Process::z(OrderParams::new(3, 1.0, 1.0)?, WeightTable::new(vec![2, 2, 5])?)?;
    let w = Process::w(OrderParams::new(2, 1.0, 1.0)?, BernsteinFn::stable(0.5)?);
    let u = Process::u(OrderParams::new(2, 1.0, 1.0)?, 1.0)?;
    let cases: [(&str, &Process); 4] = [
        ("y i=3", &y),
        ("z g=[2 2 5]", &z),
        ("w stable:0.5 i=2", &w),
        ("u i=2 beta=1", &u),
    ];
    for (idx, (name, process)) in cases.iter().enumerate() {
        rows.push(same_law_row(
            S,
            format!("{name} defining vs collapsed sampler"),
            (process, SampleMode::Superposition),
            (process, SampleMode::Compound),
            seed.wrapping_add(10_000 * idx as u64),
            paths,
        )?);
    }

    // Cross-construction identity: a Poisson-kind random clock is exactly
    // the doubly stochastic process, so the two samplers must share a law.
    let wp = Process::w(OrderParams::new(2, 1.0, 1.0)?, BernsteinFn::poisson(1.5)?);
    let up = Process::u(OrderParams::new(2, 1.0, 1.0)?, 1.5)?;
    rows.push(same_law_row(
        S,
        "w poisson:1.5 vs u beta=1.5".to_string(),
        (&wp, SampleMode::Superposition),
        (&up, SampleMode::Compound),
        seed.wrapping_add(50_000),
        paths,
    )?);

    Ok(rows)
}

// ---------------------------------------------------------------------------
// hitting

fn suite_hitting(seed: u64, paths: u64) -> anyhow::Result<Vec<CheckRow>> {
    const S: &str = "hitting";
    let mut rows = Vec::new();
    let mut mc_seed = seed;

    for i in [1u32, 2, 3] {
        let p1 = OrderParams::new(i, 1.0, 1.0)?;
        let law = jump_law_y(i)?;
        for k in 1..=6u64 {
            let v = hit_prob_by_recursion(&law, k);
            let query = HitQuery::new(Process::y(p1), k)?;
            mc_seed += 97;
            let cfg = SimConfig::new(paths, mc_seed, 4, 1.0)?;
            let mc = mc_hit_prob(&query, &cfg)?;
            rows.push(CheckRow::abs(
                S,
                format!("y i={i} k={k} recursion vs mc"),
                mc.estimate,
                v,
                3.0 * mc.halfwidth_95,
                format!("halfwidth {:.3e}", mc.halfwidth_95),
            ));
        }
        let visits = visit_probabilities(&law, 200);
        let mut worst = 0.0f64;
        for k in 1..=20u64 {
            worst = worst.max((hit_prob_by_last_jump(&law, k) - visits[k as usize]).abs());
        }
        rows.push(CheckRow::abs(
            S,
            format!("y i={i} last-jump form vs recursion"),
            worst,
            0.0,
            1e-12,
            "max over k<=20".to_string(),
        ));
        rows.push(CheckRow::abs(
            S,
            format!("y i={i} renewal limit v(200)"),
            visits[200],
            2.0 / f64::from(i + 1),
            1e-6,
            String::new(),
        ));
    }

    for i in [1u32, 2] {
        for lambda in [0.5f64, 1.0] {
            let p = OrderParams::new(i, lambda, 1.0)?;
            let law = jump_law_u(&p, 1e-12)?;
            let tag = format!("u i={i} lambda={lambda}");
            for k in [1u64, 2] {
                let closed = closed_form_hit_prob_u(&p, k)?;
                let v = hit_prob_by_recursion(&law, k);
                rows.push(CheckRow::abs(
                    S,
                    format!("{tag} k={k} closed form vs recursion"),
                    closed,
                    v,
                    1e-9,
                    String::new(),
                ));
                let query = HitQuery::new(Process::u(p, 1.0)?, k)?;
                mc_seed += 97;
                let cfg = SimConfig::new(paths, mc_seed, 4, 1.0)?;
                let mc = mc_hit_prob(&query, &cfg)?;
                rows.push(CheckRow::abs(
                    S,
                    format!("{tag} k={k} closed form vs mc"),
                    mc.estimate,
                    closed,
                    3.0 * mc.halfwidth_95,
                    format!("halfwidth {:.3e}", mc.halfwidth_95),
                ));
            }
            // The series form of the hitting probability is exact when the
            // inner chain moves by unit jumps; for larger orders the
            // difference is reported, not asserted.
            let rate = f64::from(i) * lambda;
            for k in 1..=5u64 {
                let series = iterated_hit_prob_general(rate, k, 1e-12)?;
                let v = hit_prob_by_recursion(&law, k);
                if i == 1 {
                    rows.push(CheckRow::abs(
                        S,
                        format!("{tag} k={k} series form vs recursion"),
                        series,
                        v,
                        1e-9,
                        String::new(),
                    ));
                } else {
                    rows.push(CheckRow::info(
                        S,
                        format!("{tag} k={k} series form vs recursion"),
                        series - v,
                        0.0,
                        format!(
                            "series {series:.6} recursion {v:.6}; the series form assumes unit inner jumps"
                        ),
                    ));
                }
            }
        }
    }

    for alpha in [0.3f64, 0.5, 0.8] {
        let f = BernsteinFn::stable(alpha)?;
        for i in [1u32, 2] {
            let p = OrderParams::new(i, 1.0, 1.0)?;
            let tag = format!("w stable:{alpha} i={i}");
            for k in 1..=6u64 {
                let closed = closed_form_hit_prob_w(&f, &p, k)?;
                let law = jump_law_w(&f, &p, k, 1e-9)?;
                let v = hit_prob_by_recursion(&law, k);
                rows.push(CheckRow::abs(
                    S,
                    format!("{tag} k={k} closed form vs recursion"),
                    closed.value,
                    v,
                    1e-6,
                    format!("degraded {}", closed.degraded),
                ));
            }
        }
        let unit = OrderParams::new(1, 1.0, 1.0)?;
        let law = jump_law_w(&f, &unit, 1, 1e-9)?;
        rows.push(CheckRow::abs(
            S,
            format!("w stable:{alpha} i=1 q(1)"),
            law.prob_of(1),
            alpha,
            0.0,
            "single jump point must be exact".to_string(),
        ));
    }

    Ok(rows)
}

// ---------------------------------------------------------------------------
// closed forms reported next to the recursion

fn suite_compare() -> anyhow::Result<Vec<CheckRow>> {
    const S: &str = "paper-compare";
    let mut rows = Vec::new();
    for (i, k, closed_expected, recursion_expected) in
        [(3u32, 2u64, 2.0 / 3.0, 4.0 / 9.0), (2, 2, 1.0, 0.75)]
    {
        let closed = closed_form_hit_prob_y(i, k);
        let v = hit_prob_by_recursion(&jump_law_y(i)?, k);
        let tag = format!("y i={i} k={k}");
        rows.push(CheckRow::abs(
            S,
            format!("{tag} closed form value"),
            closed,
            closed_expected,
            1e-9,
            String::new(),
        ));
        rows.push(CheckRow::abs(
            S,
            format!("{tag} recursion value"),
            v,
            recursion_expected,
            1e-9,
            String::new(),
        ));
        let agrees = (closed - v).abs() <= CLOSED_FORM_RECURSION_TOL;
        rows.push(CheckRow::abs(
            S,
            format!("{tag} divergence flag"),
            f64::from(u8::from(agrees)),
            0.0,
            0.0,
            "the two values are expected to differ here; both are reported".to_string(),
        ));
        rows.push(CheckRow::info(
            S,
            format!("{tag} closed minus recursion"),
            closed - v,
            0.0,
            String::new(),
        ));
    }

    // The weighted closed form shows the same divergence family.
    let g = WeightTable::new(vec![2, 2, 5])?;
    let law = jump_law_z(&g);
    for k in [4u64, 5] {
        let closed = closed_form_hit_prob_z(&g, k);
        let v = hit_prob_by_recursion(&law, k);
        rows.push(CheckRow::info(
            S,
            format!("z g=[2 2 5] k={k} closed minus recursion"),
            closed - v,
            0.0,
            format!("closed {closed:.6} recursion {v:.6}"),
        ));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// random clocks

fn suite_subordinator(seed: u64, draws: u64) -> anyhow::Result<Vec<CheckRow>> {
    const S: &str = "subordinator";
    let mut rows = Vec::new();
    let kinds = [
        BernsteinFn::stable(0.5)?,
        BernsteinFn::gamma(1.2, 0.8)?,
        BernsteinFn::poisson(2.0)?,
        BernsteinFn::linear(3.0)?,
    ];
    for (idx, f) in kinds.iter().enumerate() {
        let label = f.to_string().replace(',', " ");
        let check = laplace_transform_mc(f, 1.0, 1.0, draws, seed.wrapping_add(31 * idx as u64))?;
        // The deterministic kind has zero standard error; the constant term
        // absorbs float noise there.
        rows.push(CheckRow::abs(
            S,
            format!("{label} transform mc at mu=1 t=1"),
            check.mc_mean,
            check.exact,
            4.0 * check.std_error + 1e-12,
            format!("se {:.3e} over {} draws", check.std_error, check.n_draws),
        ));

        let mut margin = f64::INFINITY;
        for n in 1..=5u32 {
            for j in 1..=10u32 {
                let x = 0.3 * f64::from(j);
                let d = f.nth_deriv(x, n)?;
                let signed = if n % 2 == 1 { d } else { -d };
                margin = margin.min(signed);
            }
        }
        rows.push(CheckRow::ge(
            S,
            format!("{label} alternating-sign margin n<=5"),
            margin,
            0.0,
            "min of (-1)^(n-1) f^(n) over x=0.3..3".to_string(),
        ));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// reruns

fn push_byte_rows(rows: &mut Vec<CheckRow>, label: &str, a: &Execution, b: &Execution) {
    for ((name, bytes_a), (_, bytes_b)) in a.files.iter().zip(&b.files) {
        let ha = sha256_hex(bytes_a);
        let hb = sha256_hex(bytes_b);
        rows.push(CheckRow::abs(
            "repro",
            format!("{label} {name} bytes identical"),
            f64::from(u8::from(ha == hb)),
            1.0,
            0.0,
            format!("sha {} vs {}", &ha[..12], &hb[..12]),
        ));
    }
}

fn suite_repro(seed: u64) -> anyhow::Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let spec_y2 = ProcessSpec {
        process: ProcessKind::Y,
        i: Some(2),
        lambda: 1.0,
        t: 1.0,
        g: None,
        f: None,
        beta: None,
    };
    let output = OutputArgs {
        format: Format::Human,
        out: None,
    };

    let pmf_args = PmfArgs {
        spec: spec_y2.clone(),
        max_n: Some(12),
        output: output.clone(),
    };
    let a = run_pmf(&pmf_args)?;
    let b = run_pmf(&pmf_args)?;
    push_byte_rows(&mut rows, "pmf", &a, &b);

    let sim_args = SimulateArgs {
        spec: spec_y2.clone(),
        mode: ModeArg::Superposition,
        paths: 20_000,
        seed,
        streams: 3,
        dump_paths: None,
        output: output.clone(),
    };
    let a = run_simulate(&sim_args)?;
    let b = run_simulate(&sim_args)?;
    push_byte_rows(&mut rows, "simulate", &a, &b);

    let hit_args = HitArgs {
        spec: spec_y2,
        k: 3,
        paths: 20_000,
        seed,
        streams: 3,
        output,
    };
    let a = run_hit(&hit_args)?;
    let b = run_hit(&hit_args)?;
    push_byte_rows(&mut rows, "hit", &a, &b);

    Ok(rows)
}

// ---------------------------------------------------------------------------

fn collect_rows(suite: SuiteName, seed: u64, paths: Option<u64>) -> anyhow::Result<Vec<CheckRow>> {
    Ok(match suite {
        SuiteName::Exact => suite_exact()?,
        SuiteName::Compound => suite_compound(seed, paths.unwrap_or(100_000))?,
        SuiteName::Hitting => suite_hitting(seed, paths.unwrap_or(1_000_000))?,
        SuiteName::Compare => suite_compare()?,
        SuiteName::Subordinator => suite_subordinator(seed, paths.unwrap_or(1_000_000))?,
        SuiteName::Repro => suite_repro(seed)?,
        SuiteName::All => {
            let mut rows = suite_exact()?;
            rows.extend(suite_compound(seed, paths.unwrap_or(100_000))?);
            rows.extend(suite_hitting(seed, paths.unwrap_or(1_000_000))?);
            rows.extend(suite_compare()?);
            rows.extend(suite_subordinator(seed, paths.unwrap_or(1_000_000))?);
            rows.extend(suite_repro(seed)?);
            rows
        }
    })
}

pub fn run_verify(args: &VerifyArgs) -> anyhow::Result<Execution> {
    let started = std::time::Instant::now();
    let rows = collect_rows(args.suite, args.seed, args.paths)?;
    let n_checks = rows.iter().filter(|r| r.is_checked()).count() as u64;
    let n_failed = rows.iter().filter(|r| r.is_fail()).count() as u64;
    let n_info = rows.len() as u64 - n_checks;
    let report = SuiteReport {
        schema_version: SCHEMA_VERSION,
        suite: args.suite.token().to_string(),
        seed: args.seed,
        n_checks,
        n_failed,
        rows,
    };

    let mut csv = String::from("suite,name,kind,status,value,expected,tolerance,detail\n");
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.suite,
            csv_text(&row.name),
            row.kind,
            row.status,
            fmt_f(row.value),
            fmt_f(row.expected),
            fmt_f(row.tolerance),
            csv_text(&row.detail),
        ));
    }

    // Wall-clock time stays out of the report files so identical reruns
    // stay byte-identical.
    let mut human = String::new();
    for row in &report.rows {
        let detail = if row.detail.is_empty() {
            String::new()
        } else {
            format!("  ({})", row.detail)
        };
        human.push_str(&format!(
            "{:4}  [{}] {}  value={:.10e} expected={:.10e} tol={:.2e}{}\n",
            row.status, row.suite, row.name, row.value, row.expected, row.tolerance, detail,
        ));
    }
    human.push_str(&format!(
        "\n{} checks, {} failed, {} informational in {:.1}s\n",
        n_checks,
        n_failed,
        n_info,
        started.elapsed().as_secs_f64(),
    ));

    let mut argv = vec![
        "verify".to_string(),
        "--suite".to_string(),
        args.suite.token().to_string(),
        "--seed".to_string(),
        args.seed.to_string(),
    ];
    if let Some(p) = args.paths {
        argv.push("--paths".to_string());
        argv.push(p.to_string());
    }
    let params = json!({
        "suite": args.suite.token(),
        "seed": args.seed,
        "paths": args.paths,
    });

    Ok(Execution {
        command: "verify",
        argv,
        seed: Some(args.seed),
        params,
        files: vec![("report.json", json_bytes(&report)?)],
        human,
        csv,
        exit: if n_failed > 0 { 1 } else { 0 },
    })
}
