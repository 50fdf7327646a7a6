//! Experiment configuration: INI-style text (`[section]` headers, `key =
//! value` lines, `#` comments) parsed into a validated [`ExperimentConfig`].
//!
//! Parsing is not fail-fast: every problem in the file — unknown keys,
//! duplicate keys, type mismatches, cross-field contradictions — is
//! collected with its line number(s) and returned in one
//! [`LabError::Config`] so a config can be repaired in a single pass.
//! Section headers are organizational only; keys share one (lowercased)
//! namespace. Command-line flags are applied as overrides after the file,
//! without line numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::certify::{analytic_certificate, p_critical};
use crate::degiorgi::default_theta;
use crate::drift::{mollify, DriftField, MollificationSchedule};
use crate::error::{ConfigIssue, LabError, LabResult};
use crate::grid::{Grid, ScalarSpec};

/// Which analysis a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Certify,
    Solve,
    Energy,
    Supbound,
    Dgiter,
    HittingScan,
    Martingale,
    Krylov,
    Scaling,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Certify,
        ExperimentKind::Solve,
        ExperimentKind::Energy,
        ExperimentKind::Supbound,
        ExperimentKind::Dgiter,
        ExperimentKind::HittingScan,
        ExperimentKind::Martingale,
        ExperimentKind::Krylov,
        ExperimentKind::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Certify => "certify",
            ExperimentKind::Solve => "solve",
            ExperimentKind::Energy => "energy",
            ExperimentKind::Supbound => "supbound",
            ExperimentKind::Dgiter => "dgiter",
            ExperimentKind::HittingScan => "hitting-scan",
            ExperimentKind::Martingale => "martingale",
            ExperimentKind::Krylov => "krylov",
            ExperimentKind::Scaling => "scaling",
        }
    }

    fn needs_grid(self) -> bool {
        matches!(
            self,
            ExperimentKind::Solve | ExperimentKind::Energy | ExperimentKind::Supbound
        )
    }

    fn uses_exponent(self) -> bool {
        matches!(
            self,
            ExperimentKind::Energy | ExperimentKind::Supbound | ExperimentKind::Krylov
        )
    }

    fn uses_theta(self) -> bool {
        matches!(self, ExperimentKind::Supbound | ExperimentKind::Krylov)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                LabError::InvalidParameter(format!(
                    "unknown experiment `{s}`; expected one of {}",
                    ExperimentKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

/// Monte Carlo parameters.
#[derive(Debug, Clone)]
pub struct McSpec {
    pub m: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub x0_radius: f64,
    pub epsilon: f64,
}

/// Analysis parameters shared by the exponent/weight-driven experiments.
#[derive(Debug, Clone)]
pub struct AnalysisSpec {
    pub p: f64,
    pub theta: f64,
    pub kappa: f64,
    pub beta: f64,
    pub windows: Vec<(f64, f64)>,
    pub deltas: Vec<f64>,
    pub levels: Vec<u32>,
}

/// Parameters of the iteration-lemma experiment.
#[derive(Debug, Clone)]
pub struct DgSpec {
    pub n: f64,
    pub c0: f64,
    pub alpha: f64,
    pub y0: f64,
    pub max_m: usize,
}

/// A parsed, cross-validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub drift: Option<DriftField>,
    pub grid: Option<Grid>,
    pub store_every: usize,
    pub initial: ScalarSpec,
    pub source_f: ScalarSpec,
    pub source_h: Option<DriftField>,
    pub mc: McSpec,
    pub analysis: AnalysisSpec,
    pub dg: DgSpec,
    pub output: Option<String>,
    /// The raw `key = value` pairs the config was built from, in key order;
    /// hashing this text identifies the run.
    pub canonical: String,
}

const KNOWN_KEYS: &[(&str, &str)] = &[
    ("experiment", "one of certify, solve, energy, supbound, dgiter, hitting-scan, martingale, krylov, scaling"),
    ("output", "path of the CSV artifact"),
    ("drift", "drift id (`inverse-square:d=3:delta=1`) or bare kind assembled from `d`/`delta`/`amplitude`/`a`/`coef`"),
    ("d", "space dimension for a bare drift kind"),
    ("delta", "form bound of a bare inverse-square kind"),
    ("amplitude", "amplitude of a bare bounded-smooth kind"),
    ("a", "exponent of a bare lps-power kind"),
    ("coef", "coefficient of a bare lps-power kind"),
    ("mollify", "mollification level applied on top of `drift`"),
    ("half_width", "grid half-width L"),
    ("h", "grid spacing"),
    ("tau", "time step of the grid"),
    ("t_end", "horizon of the grid"),
    ("store_every", "keep every k-th time slice"),
    ("initial", "initial condition: `constant:c`, `bump:r=..:amp=..`, `gaussian:sigma=..:amp=..`"),
    ("source_f", "scalar factor of the source, same grammar as `initial`"),
    ("source_h", "vector factor of the source: a drift id, or `none`"),
    ("m", "number of Monte Carlo paths"),
    ("dt", "Monte Carlo time step"),
    ("horizon", "Monte Carlo horizon T"),
    ("seed", "RNG seed"),
    ("x0_radius", "start radius |x0|"),
    ("epsilon", "hitting radius"),
    ("p", "integrability exponent"),
    ("theta", "auxiliary exponent in (1, d/(d-1))"),
    ("kappa", "weight curvature"),
    ("beta", "weight decay exponent"),
    ("windows", "comma list of `t0:t1` time windows"),
    ("deltas", "comma list of form bounds to scan"),
    ("levels", "comma list of mollification levels to scan"),
    ("dg_n", "iteration-lemma factor N"),
    ("dg_c0", "iteration-lemma ratio C0"),
    ("dg_alpha", "iteration-lemma exponent alpha"),
    ("dg_y0", "iteration-lemma start y0"),
    ("dg_max_m", "iteration-lemma step budget"),
];

fn known_key(key: &str) -> bool {
    KNOWN_KEYS.iter().any(|(k, _)| *k == key)
}

#[derive(Debug, Clone)]
struct RawEntry {
    line: Option<usize>,
    value: String,
}

#[derive(Debug, Default)]
struct RawConfig {
    entries: BTreeMap<String, RawEntry>,
    issues: Vec<ConfigIssue>,
}

impl RawConfig {
    fn ingest_text(&mut self, text: &str) {
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    self.issues.push(ConfigIssue::at(
                        line_no,
                        format!("malformed section header `{line}`"),
                    ));
                }
                continue;
            }
            let Some(eq) = line.find('=') else {
                self.issues.push(ConfigIssue::at(
                    line_no,
                    format!("expected `key = value`, got `{line}`"),
                ));
                continue;
            };
            let key = line[..eq].trim().to_ascii_lowercase();
            let mut value = line[eq + 1..].trim().to_string();
            if let Some(hash) = value.find(" #") {
                value.truncate(hash);
                value = value.trim().to_string();
            }
            if key.is_empty() {
                self.issues
                    .push(ConfigIssue::at(line_no, "empty key before `=`".to_string()));
                continue;
            }
            if !known_key(&key) {
                self.issues
                    .push(ConfigIssue::at(line_no, format!("unknown key `{key}`")));
                continue;
            }
            if let Some(prev) = self.entries.get(&key) {
                self.issues.push(ConfigIssue {
                    line: Some(line_no),
                    previous_line: prev.line,
                    message: format!("duplicate key `{key}`"),
                });
                continue;
            }
            self.entries
                .insert(key, RawEntry { line: Some(line_no), value });
        }
    }

    fn ingest_overrides(&mut self, overrides: &[(String, String)]) {
        for (key, value) in overrides {
            let key = key.to_ascii_lowercase();
            if !known_key(&key) {
                self.issues
                    .push(ConfigIssue::global(format!("unknown override key `{key}`")));
                continue;
            }
            // overrides replace file values silently: flags win
            self.entries
                .insert(key, RawEntry { line: None, value: value.clone() });
        }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|e| e.line)
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T, what: &str) -> T {
        match self.entries.get(key) {
            None => default,
            Some(entry) => match entry.value.parse::<T>() {
                Ok(v) => v,
                Err(_) => {
                    let issue = format!(
                        "expected {what} for `{key}`, got `{}`",
                        entry.value
                    );
                    match entry.line {
                        Some(l) => self.issues.push(ConfigIssue::at(l, issue)),
                        None => self.issues.push(ConfigIssue::global(issue)),
                    }
                    default
                }
            },
        }
    }

    fn take_string(&mut self, key: &str) -> Option<(Option<usize>, String)> {
        self.entries.get(key).map(|e| (e.line, e.value.clone()))
    }

    fn issue_for(&mut self, key: &str, message: String) {
        match self.line_of(key) {
            Some(l) => self.issues.push(ConfigIssue::at(l, message)),
            None => self.issues.push(ConfigIssue::global(message)),
        }
    }
}

fn parse_scalar_spec(d: usize, text: &str) -> Result<ScalarSpec, String> {
    let mut parts = text.split(':');
    let kind = parts.next().unwrap_or("");
    let mut fields: BTreeMap<&str, f64> = BTreeMap::new();
    let mut lone: Option<f64> = None;
    for part in parts {
        if let Some((k, v)) = part.split_once('=') {
            let v: f64 = v.parse().map_err(|_| format!("bad number `{v}` in `{text}`"))?;
            fields.insert(k, v);
        } else {
            lone = Some(
                part.parse()
                    .map_err(|_| format!("bad number `{part}` in `{text}`"))?,
            );
        }
    }
    let get = |fields: &BTreeMap<&str, f64>, k: &str, def: f64| -> f64 {
        fields.get(k).copied().unwrap_or(def)
    };
    match kind {
        "constant" | "const" => Ok(ScalarSpec::Constant(lone.unwrap_or(1.0))),
        "bump" => Ok(ScalarSpec::Bump {
            center: vec![0.0; d],
            radius: get(&fields, "r", 1.0),
            amplitude: get(&fields, "amp", 1.0),
        }),
        "gaussian" => Ok(ScalarSpec::Gaussian {
            center: vec![0.0; d],
            sigma: get(&fields, "sigma", 0.5),
            amplitude: get(&fields, "amp", 1.0),
        }),
        other => Err(format!(
            "unknown scalar kind `{other}`; expected constant, bump, or gaussian"
        )),
    }
}

fn assemble_drift(raw: &mut RawConfig) -> Option<DriftField> {
    let (_, spec) = raw.take_string("drift")?;
    let d: usize = raw.take("d", 3, "a positive integer");
    let base = if spec.contains(':') {
        match DriftField::from_str(&spec) {
            Ok(f) => Some(f),
            Err(e) => {
                raw.issue_for("drift", format!("bad drift id `{spec}`: {e}"));
                None
            }
        }
    } else {
        let built = match spec.as_str() {
            "inverse-square" => {
                let delta: f64 = raw.take("delta", f64::NAN, "a number");
                if delta.is_nan() {
                    raw.issue_for(
                        "drift",
                        "drift kind `inverse-square` needs a `delta` key".to_string(),
                    );
                    return None;
                }
                DriftField::inverse_square(d, delta)
            }
            "bounded-smooth" => {
                let amp: f64 = raw.take("amplitude", 1.0, "a number");
                DriftField::bounded_smooth(d, amp)
            }
            "zero" => DriftField::zero(d),
            "lps-power" => {
                let a: f64 = raw.take("a", 0.5, "a number");
                let coef: f64 = raw.take("coef", 1.0, "a number");
                DriftField::lps_power(d, a, coef)
            }
            other => {
                raw.issue_for("drift", format!("unknown drift kind `{other}`"));
                return None;
            }
        };
        match built {
            Ok(f) => Some(f),
            Err(e) => {
                raw.issue_for("drift", format!("invalid drift parameters: {e}"));
                None
            }
        }
    }?;
    let level: u32 = raw.take("mollify", 0, "a positive integer");
    if level == 0 {
        return Some(base);
    }
    match MollificationSchedule::standard(level).and_then(|s| mollify(&base, s)) {
        Ok(f) => Some(f),
        Err(e) => {
            raw.issue_for("mollify", format!("cannot mollify at level {level}: {e}"));
            None
        }
    }
}

fn parse_pair_list(raw: &mut RawConfig, key: &str) -> Option<Vec<(f64, f64)>> {
    let (_, text) = raw.take_string(key)?;
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let Some((a, b)) = item.split_once(':') else {
            raw.issue_for(key, format!("expected `t0:t1` in `{key}`, got `{item}`"));
            return None;
        };
        let (a, b) = match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                raw.issue_for(key, format!("bad numbers in window `{item}`"));
                return None;
            }
        };
        if !(a < b) {
            raw.issue_for(key, format!("window `{item}` must have t0 < t1"));
            return None;
        }
        out.push((a, b));
    }
    Some(out)
}

fn parse_number_list<T: FromStr>(raw: &mut RawConfig, key: &str, what: &str) -> Option<Vec<T>> {
    let (_, text) = raw.take_string(key)?;
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        match item.parse::<T>() {
            Ok(v) => out.push(v),
            Err(_) => {
                raw.issue_for(key, format!("expected {what} in `{key}`, got `{item}`"));
                return None;
            }
        }
    }
    Some(out)
}

/// Parse an INI-style config. See the module docs for the grammar; all
/// problems are collected and returned together.
pub fn parse_config(text: &str) -> LabResult<ExperimentConfig> {
    parse_config_with_overrides(text, &[])
}

/// [`parse_config`] with `key=value` overrides (command-line flags) applied
/// on top of the file; overrides win without a duplicate-key error.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> LabResult<ExperimentConfig> {
    let mut raw = RawConfig::default();
    raw.ingest_text(text);
    raw.ingest_overrides(overrides);

    let experiment = match raw.take_string("experiment") {
        None => {
            raw.issues.push(ConfigIssue::global(
                "missing required key `experiment`".to_string(),
            ));
            None
        }
        Some((line, value)) => match ExperimentKind::from_str(&value) {
            Ok(k) => Some(k),
            Err(e) => {
                let msg = e.to_string();
                match line {
                    Some(l) => raw.issues.push(ConfigIssue::at(l, msg)),
                    None => raw.issues.push(ConfigIssue::global(msg)),
                }
                None
            }
        },
    };

    let drift = assemble_drift(&mut raw);
    let d = drift.as_ref().map(|f| f.dim()).unwrap_or_else(|| {
        let d: usize = raw.take("d", 3, "a positive integer");
        d
    });

    let store_every: usize = raw.take("store_every", 1, "a positive integer");
    let initial = match raw.take_string("initial") {
        None => ScalarSpec::unit_bump(d),
        Some((_, text)) => match parse_scalar_spec(d, &text) {
            Ok(s) => s,
            Err(e) => {
                raw.issue_for("initial", e);
                ScalarSpec::unit_bump(d)
            }
        },
    };
    let source_f = match raw.take_string("source_f") {
        None => ScalarSpec::unit_bump(d),
        Some((_, text)) => match parse_scalar_spec(d, &text) {
            Ok(s) => s,
            Err(e) => {
                raw.issue_for("source_f", e);
                ScalarSpec::unit_bump(d)
            }
        },
    };
    let source_h = match raw.take_string("source_h") {
        None => None,
        Some((_, text)) if text == "none" => None,
        Some((_, text)) => match DriftField::from_str(&text) {
            Ok(f) => Some(f),
            Err(e) => {
                raw.issue_for("source_h", format!("bad drift id `{text}`: {e}"));
                None
            }
        },
    };

    let mc = McSpec {
        m: raw.take("m", 10_000, "a positive integer"),
        dt: raw.take("dt", 1e-4, "a number"),
        horizon: raw.take("horizon", 1.0, "a number"),
        seed: raw.take("seed", 20_260_816, "an unsigned integer"),
        x0_radius: raw.take("x0_radius", 0.5, "a number"),
        epsilon: raw.take("epsilon", 0.05, "a number"),
    };
    let analysis = AnalysisSpec {
        p: raw.take("p", 2.5, "a number"),
        theta: raw.take("theta", default_theta(d), "a number"),
        kappa: raw.take("kappa", 0.01, "a number"),
        beta: raw.take("beta", d as f64 / 4.0 + 0.25, "a number"),
        windows: parse_pair_list(&mut raw, "windows")
            .unwrap_or_else(|| vec![(0.0, 0.25), (0.0, 0.5), (0.25, 0.75)]),
        deltas: parse_number_list(&mut raw, "deltas", "a number")
            .unwrap_or_else(|| vec![0.25, 1.0, 4.0, 9.0, 16.0]),
        levels: parse_number_list(&mut raw, "levels", "a positive integer")
            .unwrap_or_else(|| vec![4, 8, 16]),
    };
    let dg = DgSpec {
        n: raw.take("dg_n", 1.0, "a number"),
        c0: raw.take("dg_c0", 2.0, "a number"),
        alpha: raw.take("dg_alpha", 1.0, "a number"),
        y0: raw.take("dg_y0", 0.5, "a number"),
        max_m: raw.take("dg_max_m", 200, "a positive integer"),
    };
    let output = raw.take_string("output").map(|(_, v)| v);

    // cross-field checks
    if mc.m == 0 {
        raw.issue_for("m", "m must be >= 1".to_string());
    }
    if !(mc.dt > 0.0) {
        raw.issue_for("dt", format!("dt must be positive, got {}", mc.dt));
    }
    if !(mc.horizon > 0.0) {
        raw.issue_for("horizon", format!("horizon must be positive, got {}", mc.horizon));
    }
    if let Some(kind) = experiment {
        if kind == ExperimentKind::HittingScan && !(mc.epsilon > 0.0) {
            raw.issue_for(
                "epsilon",
                format!("hitting radius must be positive, got {}", mc.epsilon),
            );
        }
        if kind.uses_exponent() {
            if let Some(cert) = drift.as_ref().and_then(analytic_certificate) {
                match p_critical(cert.delta.max(1e-12)) {
                    Ok(p_crit) => {
                        let floor = p_crit.max(2.0);
                        if !(analysis.p > floor) {
                            let delta_key =
                                if raw.entries.contains_key("delta") { "delta" } else { "drift" };
                            raw.issues.push(ConfigIssue {
                                line: raw.line_of("p"),
                                previous_line: raw.line_of(delta_key),
                                message: format!(
                                    "p = {} must exceed max(p_delta, 2) = {} for the \
                                     configured drift (delta = {}): offending keys `p` \
                                     and `{delta_key}`",
                                    analysis.p, floor, cert.delta
                                ),
                            });
                        }
                    }
                    Err(e) => raw.issue_for("delta", e.to_string()),
                }
            }
        }
        if kind.uses_theta() {
            let theta_max = d as f64 / (d as f64 - 1.0);
            if !(analysis.theta > 1.0 && analysis.theta < theta_max) {
                raw.issues.push(ConfigIssue {
                    line: raw.line_of("theta"),
                    previous_line: raw.line_of("d").or_else(|| raw.line_of("drift")),
                    message: format!(
                        "theta = {} must lie in (1, {theta_max}) for d = {d}: offending \
                         keys `theta` and `d`",
                        analysis.theta
                    ),
                });
            }
        }
    }
    let grid = if experiment.map(|k| k.needs_grid()).unwrap_or(false) {
        let half_width: f64 = raw.take("half_width", 2.0, "a number");
        let h: f64 = raw.take("h", 0.1, "a number");
        let tau: f64 = raw.take("tau", 0.01, "a number");
        let t_end: f64 = raw.take("t_end", 0.1, "a number");
        match Grid::new(d, half_width, h, tau, t_end) {
            Ok(g) => Some(g),
            Err(e) => {
                let line = raw
                    .line_of("h")
                    .or_else(|| raw.line_of("half_width"))
                    .or_else(|| raw.line_of("tau"));
                let msg = format!("invalid grid: {e}");
                match line {
                    Some(l) => raw.issues.push(ConfigIssue::at(l, msg)),
                    None => raw.issues.push(ConfigIssue::global(msg)),
                }
                None
            }
        }
    } else {
        None
    };

    if !raw.issues.is_empty() {
        raw.issues.sort_by_key(|i| i.line.unwrap_or(0));
        return Err(LabError::Config(raw.issues));
    }

    let mut canonical = String::new();
    for (key, entry) in &raw.entries {
        canonical.push_str(key);
        canonical.push('=');
        canonical.push_str(&entry.value);
        canonical.push('\n');
    }

    Ok(ExperimentConfig {
        experiment: experiment.expect("issues were empty"),
        drift,
        grid,
        store_every,
        initial,
        source_f,
        source_h,
        mc,
        analysis,
        dg,
        output,
        canonical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(err: LabError) -> Vec<ConfigIssue> {
        match err {
            LabError::Config(v) => v,
            other => panic!("expected Config error, got {other}"),
        }
    }

    #[test]
    fn minimal_hitting_scan_config_is_valid() {
        let cfg = parse_config(
            "experiment = hitting-scan\n\
             drift = inverse-square\n\
             d = 3\n\
             delta = 9\n\
             M = 100000\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::HittingScan);
        assert_eq!(cfg.mc.m, 100_000);
        let drift = cfg.drift.unwrap();
        assert_eq!(drift.to_string(), "inverse-square:d=3:delta=9");
    }

    #[test]
    fn subcritical_exponent_names_both_keys_and_lines() {
        let err = parse_config(
            "experiment = energy\n\
             drift = inverse-square\n\
             delta = 1\n\
             p = 1.5\n",
        )
        .unwrap_err();
        let list = issues(err);
        assert_eq!(list.len(), 1, "{list:?}");
        let issue = &list[0];
        assert_eq!(issue.line, Some(4));
        assert_eq!(issue.previous_line, Some(3));
        assert!(issue.message.contains("`p`") && issue.message.contains("`delta`"));
    }

    #[test]
    fn duplicate_keys_report_both_lines() {
        let err = parse_config(
            "experiment = certify\n\
             drift = zero:d=3\n\
             seed = 1\n\
             # comment\n\
             seed = 2\n",
        )
        .unwrap_err();
        let list = issues(err);
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].line, Some(5));
        assert_eq!(list[0].previous_line, Some(3));
        assert!(list[0].message.contains("duplicate key `seed`"));
    }

    #[test]
    fn all_problems_are_collected_in_one_pass() {
        let err = parse_config(
            "experiment = certify\n\
             drift = zero:d=3\n\
             dt = fast\n\
             warp = 9\n\
             m = -1\n",
        )
        .unwrap_err();
        let list = issues(err);
        assert_eq!(list.len(), 3, "{list:?}");
        assert!(list.iter().any(|i| i.message.contains("unknown key `warp`")));
        assert!(list.iter().any(|i| i.message.contains("`dt`")));
        assert!(list.iter().any(|i| i.message.contains("`m`")));
    }

    #[test]
    fn sections_comments_and_full_ids_parse() {
        let cfg = parse_config(
            "[experiment]\n\
             experiment = krylov\n\
             output = out/krylov.csv\n\
             \n\
             [drift]\n\
             drift = mollified:n=8:inverse-square:d=3:delta=1  # level 8\n\
             \n\
             [analysis]\n\
             p = 2.5\n\
             theta = 1.25\n\
             windows = 0:0.25, 0:0.5, 0.25:0.75\n",
        )
        .unwrap();
        assert_eq!(cfg.analysis.windows.len(), 3);
        assert_eq!(cfg.output.as_deref(), Some("out/krylov.csv"));
        assert_eq!(
            cfg.drift.unwrap().to_string(),
            "mollified:n=8:inverse-square:d=3:delta=1"
        );
    }

    #[test]
    fn theta_out_of_range_is_a_cross_field_error() {
        let err = parse_config(
            "experiment = supbound\n\
             drift = inverse-square:d=3:delta=1\n\
             p = 2.5\n\
             theta = 1.8\n",
        )
        .unwrap_err();
        let list = issues(err);
        assert_eq!(list.len(), 1, "{list:?}");
        assert!(list[0].message.contains("theta"));
        assert_eq!(list[0].line, Some(4));
    }

    #[test]
    fn overrides_replace_file_values_without_duplicate_errors() {
        let cfg = parse_config_with_overrides(
            "experiment = dgiter\ndg_y0 = 0.5\n",
            &[
                ("dg_y0".to_string(), "0.6".to_string()),
                ("dg_c0".to_string(), "2".to_string()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.dg.y0, 0.6);
        assert_eq!(cfg.dg.c0, 2.0);
        // canonical text reflects the effective values
        assert!(cfg.canonical.contains("dg_y0=0.6"));
    }

    #[test]
    fn grid_is_built_only_for_grid_experiments_and_validated() {
        let cfg = parse_config(
            "experiment = solve\n\
             drift = zero:d=3\n\
             half_width = 2\n\
             h = 0.25\n\
             tau = 0.02\n\
             t_end = 0.1\n",
        )
        .unwrap();
        assert!(cfg.grid.is_some());

        let err = parse_config(
            "experiment = solve\n\
             drift = zero:d=3\n\
             h = 0.3\n",
        )
        .unwrap_err();
        assert!(issues(err)[0].message.contains("invalid grid"));

        let cfg = parse_config("experiment = martingale\ndrift = zero:d=3\n").unwrap();
        assert!(cfg.grid.is_none());
    }
}
