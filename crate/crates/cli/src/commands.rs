use std::ops::Range;

use serde::Serialize;
use serde_json::{json, Value};

use phidep::gaussian::{McConfig, DEFAULT_MC_DRAWS};
use phidep::mle::{bootstrap, fit_pseudo_mle, fit_staged, pseudo_observations};
use phidep::normal::norm_quantile;
use phidep::{
    contagion_test, data, estimate_gaussian, estimate_hellinger_reduced, estimate_phi_mc, io, rolling_dependence, Direction,
    Error, ExtendedReal, GaussianOptions, GroupStructure, GroupedSample, PhiKind, Result,
};

use crate::args::{ContagionArgs, EstimateArgs, FitArgs, Format, Input, RollingArgs, Scale, SimulateArgs, ValidateArgs};
use crate::model_spec::ModelSpec;

/// A finished artifact, before provenance is attached.
pub enum Artifact {
    Json(Value),
    Csv(String),
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(format!("serialization failed: {e}")))
}

fn json_only(format: Option<Format>, command: &str) -> Result<()> {
    match format {
        Some(Format::Csv) => Err(Error::InvalidParameter(format!(
            "{command} produces nested results; CSV export is available for simulate, rolling and contagion"
        ))),
        _ => Ok(()),
    }
}

fn load(input: &Input) -> Result<GroupedSample> {
    let groups = GroupStructure::parse(&input.groups)?;
    let table = io::read_table_path(&input.input)?;
    if table.column_labels.len() != groups.q() {
        return Err(Error::Dimension(format!(
            "--groups {} covers {} columns but {} has {}",
            input.groups,
            groups.q(),
            input.input.display(),
            table.column_labels.len()
        )));
    }
    if input.log_returns {
        data::log_returns(&table, groups, input.missing.into())
    } else {
        io::table_to_sample(&table, groups, input.missing.into())
    }
}

fn gaussian_options(input: &Input, mc_samples: Option<usize>, seed: u64) -> GaussianOptions {
    GaussianOptions { ties: input.ties.into(), mc: McConfig { draws: mc_samples.unwrap_or(DEFAULT_MC_DRAWS), seed } }
}

pub fn validate(a: &ValidateArgs) -> Result<Artifact> {
    json_only(a.common.format, "validate")?;
    let groups = GroupStructure::parse(&a.input.groups)?;
    let table = io::read_table_path(&a.input.input)?;
    let incomplete = table.rows.iter().filter(|r| r.iter().any(Option::is_none)).count();
    let sample = load(&a.input)?;
    let tied: Vec<&str> = sample.tied_columns().iter().map(|&j| sample.column_labels()[j].as_str()).collect();
    if !tied.is_empty() && a.input.ties == crate::args::Ties::Error {
        return Err(Error::InvalidParameter(format!(
            "columns {tied:?} contain ties; rerun with --ties midrank to average their ranks"
        )));
    }
    Ok(Artifact::Json(json!({
        "valid": true,
        "rows_read": table.rows.len(),
        "rows_with_missing": incomplete,
        "n": sample.n(),
        "q": sample.q(),
        "groups": groups.sizes(),
        "columns": sample.column_labels(),
        "row_labels": table.row_labels.is_some(),
        "log_returns": a.input.log_returns,
        "tied_columns": tied,
    })))
}

pub fn estimate(a: &EstimateArgs) -> Result<Artifact> {
    json_only(a.common.format, "estimate")?;
    let spec: ModelSpec = a.copula.parse()?;
    let sample = load(&a.input)?;
    let seed = a.common.seed;
    if spec.is_gaussian() {
        let res = estimate_gaussian(&sample, &a.phi, a.alpha, &gaussian_options(&a.input, a.mc_samples, seed))?;
        let mut v = to_value(&res)?;
        v["correlation"] = to_value(&res.r)?;
        return Ok(Artifact::Json(v));
    }
    let template = spec.template(sample.structure())?;
    let u = pseudo_observations(&sample, a.input.ties.into())?;
    let mut fit = match spec.explicit_params() {
        Some(start) => fit_pseudo_mle(&u, &template, &start)?,
        None => fit_staged(&u, &template)?,
    };
    if let Some(b) = a.bootstrap {
        fit.bootstrap_v = Some(bootstrap(&sample, &template, b, seed)?);
    }
    let model = template.with_params(&fit.theta_hat)?;
    let m = a.mc_samples.unwrap_or(phidep::mc::DEFAULT_M);
    let est = if a.phi.kind() == PhiKind::Hellinger && !a.general_hellinger {
        estimate_hellinger_reduced(&model, m, seed)?
    } else {
        estimate_phi_mc(&model, &a.phi, m, seed)?
    };
    let mut v = to_value(&est)?;
    v["normalized_value"] = json!(a.phi.normalize(ExtendedReal::Finite(est.value)));
    v["n"] = json!(sample.n());
    v["method"] = json!("parametric-monte-carlo");
    v["model"] = to_value(&model)?;
    v["fit"] = to_value(&fit)?;
    Ok(Artifact::Json(v))
}

pub fn fit(a: &FitArgs) -> Result<Artifact> {
    json_only(a.common.format, "fit")?;
    let spec: ModelSpec = a.family.parse()?;
    let sample = load(&a.input)?;
    let template = spec.template(sample.structure())?;
    let u = pseudo_observations(&sample, a.input.ties.into())?;
    let mut fit = match spec.explicit_params() {
        Some(start) => fit_pseudo_mle(&u, &template, &start)?,
        None => fit_staged(&u, &template)?,
    };
    if let Some(b) = a.bootstrap {
        fit.bootstrap_v = Some(bootstrap(&sample, &template, b, a.common.seed)?);
    }
    let mut v = to_value(&fit)?;
    v["n"] = json!(sample.n());
    v["model"] = to_value(&template.with_params(&fit.theta_hat)?)?;
    Ok(Artifact::Json(v))
}

pub fn simulate(a: &SimulateArgs) -> Result<Artifact> {
    let spec: ModelSpec = a.copula.parse()?;
    let groups = a.groups.as_deref().map(GroupStructure::parse).transpose()?;
    let model = spec.model(groups.as_ref())?;
    let mut x = model.sampler()?.sample(a.m, a.common.seed);
    if a.scale == Scale::Normal {
        x.apply(|v| *v = norm_quantile(*v));
    }
    let prefix = if a.scale == Scale::Normal { "z" } else { "u" };
    let header: Vec<String> = (1..=x.ncols()).map(|j| format!("{prefix}{j}")).collect();
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            io::write_matrix_csv(&mut buf, &header, &x)?;
            Ok(Artifact::Csv(String::from_utf8(buf).expect("CSV output is UTF-8")))
        }
        Format::Json => {
            let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
            Ok(Artifact::Json(json!({
                "model": to_value(&model)?,
                "scale": a.scale,
                "columns": header,
                "rows": rows,
            })))
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn rolling(a: &RollingArgs) -> Result<Artifact> {
    let sample = load(&a.input)?;
    let opts = gaussian_options(&a.input, a.mc_samples, a.common.seed);
    let series = rolling_dependence(&sample, a.window, a.step, &a.phi, a.alpha, &opts)?;
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = to_value(&series)?;
            v["plot"] = to_value(&series.plot_data())?;
            Ok(Artifact::Json(v))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = series
                .entries
                .iter()
                .map(|e| {
                    vec![
                        e.window_start_label.clone(),
                        e.start.to_string(),
                        e.end.to_string(),
                        e.n.to_string(),
                        e.value.map(|v| v.to_f64().to_string()).unwrap_or_default(),
                        opt(e.sd),
                        opt(e.ci_lo),
                        opt(e.ci_hi),
                        e.short_window.to_string(),
                    ]
                })
                .collect();
            let header = ["label", "start", "end", "n", "value", "sd", "ci_lo", "ci_hi", "short_window"];
            Ok(Artifact::Csv(csv_string(&header, &rows)?))
        }
    }
}

/// `a:b`, 1-based and inclusive, to a 0-based half-open range.
pub fn parse_period(s: &str, n: usize) -> Result<Range<usize>> {
    let (a, b) = s.split_once(':').ok_or_else(|| Error::Parse(format!("period {s:?} must look like first:last")))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad row number {t:?} in period {s:?}")));
    let (a, b) = (parse(a)?, parse(b)?);
    if a == 0 || b < a {
        return Err(Error::InvalidParameter(format!("period {s:?} must satisfy 1 <= first <= last")));
    }
    if b > n {
        return Err(Error::InvalidParameter(format!("period {s:?} ends after the last row ({n})")));
    }
    Ok(a - 1..b)
}

pub fn contagion(a: &ContagionArgs) -> Result<Artifact> {
    let sample = load(&a.input)?;
    let opts = gaussian_options(&a.input, a.mc_samples, a.common.seed);
    let mut periods = vec![("period1", parse_period(&a.period1, sample.n())?), ("period2", parse_period(&a.period2, sample.n())?)];
    if let Some(p3) = &a.period3 {
        periods.push(("period3", parse_period(p3, sample.n())?));
    }
    let estimates = periods
        .iter()
        .map(|(_, r)| estimate_gaussian(&sample.slice_rows(r.clone())?, &a.phi, a.alpha, &opts))
        .collect::<Result<Vec<_>>>()?;
    let mut tests = vec![("period1", "period2", contagion_test(&estimates[0], &estimates[1], Direction::IncreaseIntoCrisis)?)];
    if estimates.len() == 3 {
        tests.push(("period2", "period3", contagion_test(&estimates[1], &estimates[2], Direction::DecreaseAfterCrisis)?));
    }
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let periods: Vec<Value> = periods
                .iter()
                .zip(&estimates)
                .map(|((name, r), e)| Ok(json!({ "name": name, "rows": [r.start + 1, r.end], "estimate": to_value(e)? })))
                .collect::<Result<_>>()?;
            let tests: Vec<Value> = tests
                .iter()
                .map(|(from, to, t)| {
                    Ok(json!({ "from": from, "to": to, "z": t.z, "p_value": t.p_value, "direction": t.direction, "n1": t.n1, "n2": t.n2 }))
                })
                .collect::<Result<_>>()?;
            Ok(Artifact::Json(json!({ "phi": a.phi.name(), "alpha": a.alpha, "periods": periods, "tests": tests })))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = tests
                .iter()
                .map(|(from, to, t)| {
                    vec![
                        from.to_string(),
                        to.to_string(),
                        to_value(&t.direction).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default(),
                        t.z.to_string(),
                        t.p_value.to_string(),
                        t.n1.to_string(),
                        t.n2.to_string(),
                    ]
                })
                .collect();
            Ok(Artifact::Csv(csv_string(&["from", "to", "direction", "z", "p_value", "n1", "n2"], &rows)?))
        }
    }
}
