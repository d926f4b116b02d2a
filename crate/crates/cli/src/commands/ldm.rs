use std::fmt::Write;

use bellpoly::inequalities::{eval_bell_clauser_horne, format_scalar};
use bellpoly::ldm::{
    anticorrelated_model, build_quantum_targeting_model, check_parameter_independence, check_reichenbach, check_screening_off,
    conspiracy_model, correlated_sources_model, exact_probabilities, lambda_decomposition, par_models, random_model, simulate,
    LdmModel, ModelSizes, TripleJoint,
};
use bellpoly::qprob::Geometry;
use bellpoly::scalar::scalar_from_json;
use bellpoly::{Rational, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{geometry_json, table_csv, Report, Settings};
use crate::error::CliError;
use crate::scenario::Scenario;

pub const DEFAULT_TRIALS: u64 = 100_000;
const PRESETS: [&str; 5] = ["random", "conspiracy", "correlated_sources", "anticorrelated", "quantum_targeting"];

pub fn ldm(s: &Scenario, cfg: &Settings) -> Result<Report, CliError> {
    if let Some(triple) = &s.triple {
        return reichenbach(triple, cfg);
    }
    let sizes = s
        .sizes
        .map(|[mu, lambda, nu]| ModelSizes { mu, lambda, nu })
        .unwrap_or_default();
    if [sizes.mu, sizes.lambda, sizes.nu].contains(&0) {
        return Err(CliError::Usage("sizes must be positive".into()));
    }
    let no_conspiracy = s.no_conspiracy.unwrap_or(true);
    if let Some(count) = s.batch {
        return if cfg.exact {
            batch::<Rational>(count, sizes, no_conspiracy, cfg)
        } else {
            batch::<f64>(count, sizes, no_conspiracy, cfg)
        };
    }
    match s.model.as_ref().unwrap_or(&Value::String("random".into())) {
        Value::String(name) => match name.as_str() {
            "quantum_targeting" => {
                if cfg.exact {
                    return Err(CliError::Usage("quantum_targeting works in floating point; drop --exact".into()));
                }
                targeting(&s.geometry()?.unwrap_or_else(Geometry::violating), cfg)
            }
            "random" => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                if cfg.exact {
                    model_report(&random_model::<Rational, _>(&mut rng, sizes, no_conspiracy), cfg, name)
                } else {
                    model_report(&random_model::<f64, _>(&mut rng, sizes, no_conspiracy), cfg, name)
                }
            }
            "conspiracy" | "correlated_sources" | "anticorrelated" => {
                let m = match name.as_str() {
                    "conspiracy" => conspiracy_model(),
                    "correlated_sources" => correlated_sources_model(),
                    _ => anticorrelated_model(),
                };
                if cfg.exact {
                    model_report(&m, cfg, name)
                } else {
                    model_report(&m.to_f64(), cfg, name)
                }
            }
            other => Err(CliError::Usage(format!("unknown model preset {other:?}; expected one of {}", PRESETS.join(", ")))),
        },
        v @ Value::Object(_) => {
            let parse_err = |e: bellpoly::ldm::LdmError| CliError::Malformed(format!("model: {e}"));
            if cfg.exact {
                model_report(&LdmModel::<Rational>::from_json(v).map_err(parse_err)?, cfg, "explicit")
            } else {
                model_report(&LdmModel::<f64>::from_json(v).map_err(parse_err)?, cfg, "explicit")
            }
        }
        other => Err(CliError::Usage(format!("model must be a preset name or an object, got {other}"))),
    }
}

fn model_report<S: Scalar>(m: &LdmModel<S>, cfg: &Settings, source: &str) -> Result<Report, CliError> {
    let stats = exact_probabilities(m);
    let table = stats.table();
    let bch = table.as_ref().map(eval_bell_clauser_horne);
    let so = check_screening_off(m);
    let pi = check_parameter_independence(m);
    let decomposition = lambda_decomposition(m);
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let sim = simulate(m, trials, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let [sm, sl, sn] = m.sizes();
    let product = m.measure().is_product();

    let mut result = json!({
        "source": source,
        "sizes": [sm, sl, sn],
        "no_conspiracy": m.no_conspiracy(),
        "product_measure": product,
        "exact": stats.to_json(),
        "table": table.as_ref().map(|t| t.to_json()),
        "bell_clauser_horne": bch.as_ref().map(|r| r.to_json()),
        "screening_off": so.to_json(),
        "parameter_independence": pi.to_json(),
        "decomposition_matches_table": match (&decomposition, &table) {
            (Some(d), Some(t)) => json!(d
                .to_correlation_vector()
                .flat()
                .into_iter()
                .zip(t.to_correlation_vector().flat())
                .all(|(a, b)| (a - b).abs() <= S::tol(bellpoly::ldm::PROB_TOL))),
            _ => Value::Null,
        },
        "simulation": sim.to_json(),
    });
    if source == "explicit" || source == "random" {
        result["model"] = m.to_json();
    }

    let mut text = format!(
        "LDM model ({source}): |M|={sm} |L|={sl} |N|={sn}, no-conspiracy {}, {} measure\n",
        if m.no_conspiracy() { "on" } else { "off" },
        if product { "product" } else { "correlated" }
    );
    match (&table, &bch) {
        (Some(t), Some(r)) => {
            let _ = write!(text, "\n{}\n{}", t.to_text(), r.to_text());
        }
        _ => text.push_str("conditional table undefined: some setting never occurs\n"),
    }
    let status = |holds: bool| if holds { "holds" } else { "FAILS" };
    let _ = writeln!(text, "\nscreening-off: {} for every lambda", status(so.holds()));
    let _ = writeln!(text, "parameter independence: {} for every lambda", status(pi.holds()));
    let _ = writeln!(text, "simulation: {trials} trials, seed {}", cfg.seed);
    if let Some(t) = sim.table() {
        let _ = write!(text, "{}", t.to_text());
    }

    let mut report = Report::new(result, text, table.as_ref().map(table_csv).unwrap_or_else(|| "entry,value\n".into()));
    if m.no_conspiracy() && product {
        let tol = S::tol(bellpoly::inequalities::MARGIN_TOL);
        if let Some(r) = bch.as_ref().filter(|r| !r.satisfied_within(tol.clone())) {
            report.breach = Some((
                "a no-conspiracy product-measure model violates Bell-Clauser-Horne".into(),
                json!({"model": m.to_json(), "bell_clauser_horne": r.to_json()}),
            ));
        }
    }
    if product && (!so.holds() || !pi.holds()) && report.breach.is_none() {
        report.breach = Some((
            "screening-off or parameter independence fails under a product measure".into(),
            json!({"model": m.to_json(), "screening_off": so.to_json(), "parameter_independence": pi.to_json()}),
        ));
    }
    Ok(report)
}

fn batch<S: Scalar>(count: usize, sizes: ModelSizes, no_conspiracy: bool, cfg: &Settings) -> Result<Report, CliError> {
    if count == 0 {
        return Err(CliError::Usage("batch must be at least 1".into()));
    }
    struct Outcome {
        defined: bool,
        violated: bool,
        max_margin: Option<f64>,
        screening: bool,
        independence: bool,
        seed: u64,
    }
    let outcomes = par_models(count, cfg.seed, |seed| {
        let m = random_model::<S, _>(&mut ChaCha8Rng::seed_from_u64(seed), sizes, no_conspiracy);
        let table = exact_probabilities(&m).table();
        let report = table.as_ref().map(eval_bell_clauser_horne);
        Outcome {
            defined: table.is_some(),
            violated: report.as_ref().is_some_and(|r| !r.satisfied_within(S::tol(bellpoly::inequalities::MARGIN_TOL))),
            max_margin: report.as_ref().map(|r| r.max_margin().to_f64_lossy()),
            screening: check_screening_off(&m).holds(),
            independence: check_parameter_independence(&m).holds(),
            seed,
        }
    });
    let defined = outcomes.iter().filter(|o| o.defined).count();
    let violated: Vec<u64> = outcomes.iter().filter(|o| o.violated).map(|o| o.seed).collect();
    let screening_failures = outcomes.iter().filter(|o| !o.screening).count();
    let independence_failures = outcomes.iter().filter(|o| !o.independence).count();
    let max_margin = outcomes.iter().filter_map(|o| o.max_margin).fold(f64::NEG_INFINITY, f64::max);
    let max_margin = max_margin.is_finite().then_some(max_margin);
    let result = json!({
        "source": "batch",
        "models": count,
        "sizes": [sizes.mu, sizes.lambda, sizes.nu],
        "no_conspiracy": no_conspiracy,
        "defined_tables": defined,
        "violations": violated.len(),
        "violating_seeds": violated,
        "max_margin": max_margin,
        "screening_off_failures": screening_failures,
        "parameter_independence_failures": independence_failures,
    });
    let text = format!(
        "{count} random models ({}), |M|={} |L|={} |N|={}\n\
         conditional table defined: {defined}\n\
         Bell-Clauser-Horne violations: {}\n\
         largest margin: {}\n\
         screening-off failures: {screening_failures}\n\
         parameter independence failures: {independence_failures}\n",
        if no_conspiracy { "no-conspiracy" } else { "conspiracy allowed" },
        sizes.mu,
        sizes.lambda,
        sizes.nu,
        violated.len(),
        max_margin.map_or("n/a".to_string(), |m| format!("{m:.6}")),
    );
    let csv = format!(
        "models,defined,violations,screening_off_failures,parameter_independence_failures\n{count},{defined},{},{screening_failures},{independence_failures}\n",
        violated.len()
    );
    let mut report = Report::new(result.clone(), text, csv);
    if (no_conspiracy && !violated.is_empty()) || screening_failures > 0 || independence_failures > 0 {
        report.breach = Some(("a random product-measure model broke a theorem".into(), result));
    }
    Ok(report)
}

fn targeting(g: &Geometry<f64>, cfg: &Settings) -> Result<Report, CliError> {
    let r = build_quantum_targeting_model(g).map_err(|e| CliError::Invariant {
        message: format!("targeting: {e}"),
        dump: geometry_json(g),
    })?;
    let mut base = model_report(&r.model, cfg, "quantum_targeting")?;
    base.result["geometry"] = geometry_json(g);
    base.result["quantum_table"] = r.quantum_table.to_json();
    base.result["residual_l1"] = json!(r.residual);
    base.text = format!(
        "closest no-conspiracy model to the singlet table: L1 distance {}\n\nquantum table\n{}\n{}",
        format_scalar(&r.residual),
        r.quantum_table.to_text(),
        base.text
    );
    Ok(base)
}

fn reichenbach(triple: &[Value], cfg: &Settings) -> Result<Report, CliError> {
    if triple.len() != 8 {
        return Err(CliError::Usage(format!("triple needs 8 probabilities, got {}", triple.len())));
    }
    fn run<S: Scalar>(triple: &[Value]) -> Result<Report, CliError> {
        let values: Vec<S> = triple
            .iter()
            .map(|v| scalar_from_json::<S>(v).ok_or_else(|| CliError::Usage(format!("triple entry {v} is not a probability"))))
            .collect::<Result<_, _>>()?;
        let arr: [S; 8] = values.try_into().expect("length checked");
        let r = check_reichenbach(&TripleJoint(arr)).map_err(|e| CliError::Malformed(e.to_string()))?;
        let side = |v: Option<bool>| match v {
            Some(true) => "screens off",
            Some(false) => "does not screen off",
            None => "undefined",
        };
        let result = json!({
            "source": "reichenbach",
            "given_c": r.given_c,
            "given_not_c": r.given_not_c,
            "common_cause": r.holds(),
        });
        let text = format!(
            "given C: {}\ngiven not C: {}\nC {} a screening common cause\n",
            side(r.given_c),
            side(r.given_not_c),
            if r.holds() { "is" } else { "is not" }
        );
        let csv = format!(
            "given_c,given_not_c,common_cause\n{},{},{}\n",
            r.given_c.map_or(String::new(), |b| b.to_string()),
            r.given_not_c.map_or(String::new(), |b| b.to_string()),
            r.holds()
        );
        Ok(Report::new(result, text, csv))
    }
    if cfg.exact {
        run::<Rational>(triple)
    } else {
        run::<f64>(triple)
    }
}
