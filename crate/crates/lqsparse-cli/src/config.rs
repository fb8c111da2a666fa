//! Run configuration: sectioned key-value text, parse-then-validate, with
//! dotted-path overrides. The manifest written into every run directory uses
//! the same syntax and parses back to the identical configuration, so a run
//! can be reproduced from its own manifest.

use std::fmt::Write as _;

use lqsparse::fem::EllipticCoeffs;
use lqsparse::func::{FuncSpec, Region};
use lqsparse::interp::StudyNorm;
use lqsparse::ocp::{InnerMethod, ProblemSpec, SolveOptions};

#[derive(Clone, Debug)]
pub struct RunConfig {
    // [problem]
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    pub gamma: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub y_d: String,
    pub f: String,
    // [mesh]
    pub n: usize,
    pub levels: usize,
    pub ref_extra: usize,
    // [solver]
    pub tol_outer: f64,
    pub tol_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub damping: f64,
    pub inner_method: String,
    // [output]
    pub directory: Option<String>,
    pub formats: Vec<String>,
    // [eoc]
    pub q_values: Vec<f64>,
    pub jobs: usize,
    // [interp]
    pub interp_u: String,
    pub interp_base_n: usize,
    pub interp_levels: usize,
    pub interp_norm: String,
}

impl Default for RunConfig {
    /// The shipped example problem at desk scale.
    fn default() -> Self {
        RunConfig {
            alpha: 0.24,
            beta: 2e-4,
            q: 0.5,
            gamma: 16000.0,
            u_a: -0.8,
            u_b: 0.55,
            y_d: "paper-example".into(),
            f: "zero".into(),
            n: 32,
            levels: 4,
            ref_extra: 2,
            tol_outer: 1e-9,
            tol_inner: 1e-10,
            max_outer: 200,
            max_inner: 50,
            damping: 1.0,
            inner_method: "semi-smooth-newton".into(),
            directory: None,
            formats: vec!["csv".into(), "vtk".into()],
            q_values: vec![0.5, 0.41, 0.38, 0.31],
            jobs: 1,
            interp_u: "disk:cx=0.5,cy=0.5,r=0.3".into(),
            interp_base_n: 8,
            interp_levels: 5,
            interp_norm: "l1".into(),
        }
    }
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, String> {
    strip_quotes(raw)
        .parse()
        .map_err(|_| format!("{key}: expected a number, got `{raw}`"))
}

fn parse_usize(key: &str, raw: &str) -> Result<usize, String> {
    strip_quotes(raw)
        .parse()
        .map_err(|_| format!("{key}: expected a nonnegative integer, got `{raw}`"))
}

fn parse_f64_array(key: &str, raw: &str) -> Result<Vec<f64>, String> {
    let inner = raw
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("{key}: expected [a, b, ...], got `{raw}`"))?;
    inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn parse_string_array(key: &str, raw: &str) -> Result<Vec<String>, String> {
    let inner = raw
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("{key}: expected [\"a\", ...], got `{raw}`"))?;
    Ok(inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| strip_quotes(s).to_string())
        .collect())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            // strip the comment at the first # outside quotes
            let mut in_quotes = false;
            let mut cut = raw.len();
            for (pos, ch) in raw.char_indices() {
                match ch {
                    '"' => in_quotes = !in_quotes,
                    '#' if !in_quotes => {
                        cut = pos;
                        break;
                    }
                    _ => {}
                }
            }
            let line = raw[..cut].trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value, got `{line}`", idx + 1))?;
            let path = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            cfg.set(&path, value.trim())?;
        }
        Ok(cfg)
    }

    /// Applies one dotted-path override such as `problem.alpha=0.3`.
    pub fn set(&mut self, path: &str, raw: &str) -> Result<(), String> {
        match path {
            "problem.alpha" => self.alpha = parse_f64(path, raw)?,
            "problem.beta" => self.beta = parse_f64(path, raw)?,
            "problem.q" => self.q = parse_f64(path, raw)?,
            "problem.gamma" => self.gamma = parse_f64(path, raw)?,
            "problem.u_a" => self.u_a = parse_f64(path, raw)?,
            "problem.u_b" => self.u_b = parse_f64(path, raw)?,
            "problem.y_d" => self.y_d = strip_quotes(raw).to_string(),
            "problem.f" => self.f = strip_quotes(raw).to_string(),
            "mesh.n" => self.n = parse_usize(path, raw)?,
            "mesh.levels" => self.levels = parse_usize(path, raw)?,
            "mesh.ref_extra" => self.ref_extra = parse_usize(path, raw)?,
            "solver.tol_outer" => self.tol_outer = parse_f64(path, raw)?,
            "solver.tol_inner" => self.tol_inner = parse_f64(path, raw)?,
            "solver.max_outer" => self.max_outer = parse_usize(path, raw)?,
            "solver.max_inner" => self.max_inner = parse_usize(path, raw)?,
            "solver.damping" => self.damping = parse_f64(path, raw)?,
            "solver.inner_method" => self.inner_method = strip_quotes(raw).to_string(),
            "output.directory" => self.directory = Some(strip_quotes(raw).to_string()),
            "output.formats" => self.formats = parse_string_array(path, raw)?,
            "eoc.q_values" => self.q_values = parse_f64_array(path, raw)?,
            "eoc.jobs" => self.jobs = parse_usize(path, raw)?.max(1),
            "interp.u" => self.interp_u = strip_quotes(raw).to_string(),
            "interp.base_n" => self.interp_base_n = parse_usize(path, raw)?,
            "interp.levels" => self.interp_levels = parse_usize(path, raw)?,
            "interp.norm" => self.interp_norm = strip_quotes(raw).to_string(),
            _ => return Err(format!("unknown configuration key `{path}`")),
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, String> {
        let spec = ProblemSpec {
            params: lqsparse::RegParams {
                q: self.q,
                gamma: self.gamma,
                alpha: self.alpha,
                beta: self.beta,
                u_a: self.u_a,
                u_b: self.u_b,
            },
            y_d: parse_func(&self.y_d)?,
            f: parse_func(&self.f)?,
            coeffs: EllipticCoeffs::laplace(),
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn solve_options(&self) -> Result<SolveOptions, String> {
        let inner_method = match self.inner_method.as_str() {
            "semi-smooth-newton" => InnerMethod::SemiSmoothNewton,
            "picard" => InnerMethod::Picard,
            other => {
                return Err(format!(
                    "solver.inner_method must be `semi-smooth-newton` or `picard`, got `{other}`"
                ))
            }
        };
        let opts = SolveOptions {
            tol_outer: self.tol_outer,
            tol_inner: self.tol_inner,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            damping: self.damping,
            inner_method,
            initial_control: None,
        };
        opts.validate().map_err(|e| e.to_string())?;
        Ok(opts)
    }

    pub fn study_norm(&self) -> Result<StudyNorm, String> {
        match self.interp_norm.to_lowercase().as_str() {
            "l1" => Ok(StudyNorm::L1),
            "l2" => Ok(StudyNorm::L2),
            other => Err(format!("interp.norm must be l1 or l2, got `{other}`")),
        }
    }

    /// Full echo in the config syntax; feeding this back as `--config`
    /// reproduces the run.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[problem]");
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "q = {}", self.q);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "u_a = {}", self.u_a);
        let _ = writeln!(s, "u_b = {}", self.u_b);
        let _ = writeln!(s, "y_d = \"{}\"", self.y_d);
        let _ = writeln!(s, "f = \"{}\"", self.f);
        let _ = writeln!(s, "\n[mesh]");
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "levels = {}", self.levels);
        let _ = writeln!(s, "ref_extra = {}", self.ref_extra);
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "tol_outer = {}", self.tol_outer);
        let _ = writeln!(s, "tol_inner = {}", self.tol_inner);
        let _ = writeln!(s, "max_outer = {}", self.max_outer);
        let _ = writeln!(s, "max_inner = {}", self.max_inner);
        let _ = writeln!(s, "damping = {}", self.damping);
        let _ = writeln!(s, "inner_method = \"{}\"", self.inner_method);
        let _ = writeln!(s, "\n[output]");
        if let Some(dir) = &self.directory {
            let _ = writeln!(s, "directory = \"{dir}\"");
        }
        let formats: Vec<String> = self.formats.iter().map(|f| format!("\"{f}\"")).collect();
        let _ = writeln!(s, "formats = [{}]", formats.join(", "));
        let _ = writeln!(s, "\n[eoc]");
        let qs: Vec<String> = self.q_values.iter().map(|q| q.to_string()).collect();
        let _ = writeln!(s, "q_values = [{}]", qs.join(", "));
        let _ = writeln!(s, "jobs = {}", self.jobs);
        let _ = writeln!(s, "\n[interp]");
        let _ = writeln!(s, "u = \"{}\"", self.interp_u);
        let _ = writeln!(s, "base_n = {}", self.interp_base_n);
        let _ = writeln!(s, "levels = {}", self.interp_levels);
        let _ = writeln!(s, "norm = \"{}\"", self.interp_norm);
        s
    }
}

/// Named data presets: `zero`, `constant:VALUE`, `paper-example`,
/// `sine-product[:amp=A]`, `custom-gaussian:amp=..,decay=..,cx=..,cy=..`,
/// `disk:cx=..,cy=..,r=..`, `half-plane-x:c=..`.
pub fn parse_func(text: &str) -> Result<FuncSpec, String> {
    let (name, args) = match text.split_once(':') {
        Some((n, a)) => (n.trim(), a.trim()),
        None => (text.trim(), ""),
    };
    let params = parse_args(args)?;
    let get = |key: &str, default: Option<f64>| -> Result<f64, String> {
        params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| Ok(*v))
            .or(default.map(Ok))
            .unwrap_or_else(|| Err(format!("preset `{name}` needs parameter `{key}`")))
    };
    match name {
        "zero" => Ok(FuncSpec::Zero),
        "constant" => {
            // accept either `constant:VALUE` or `constant:value=VALUE`
            if let Ok(v) = args.parse::<f64>() {
                Ok(FuncSpec::Constant(v))
            } else {
                Ok(FuncSpec::Constant(get("value", None)?))
            }
        }
        "paper-example" => Ok(FuncSpec::example_target()),
        "sine-product" => Ok(FuncSpec::SineProduct { amp: get("amp", Some(1.0))? }),
        "custom-gaussian" => Ok(FuncSpec::Gaussian {
            amp: get("amp", None)?,
            decay: get("decay", None)?,
            cx: get("cx", Some(0.0))?,
            cy: get("cy", Some(0.0))?,
        }),
        "disk" => Ok(FuncSpec::Indicator(Region::Disk {
            cx: get("cx", None)?,
            cy: get("cy", None)?,
            r: get("r", None)?,
        })),
        "half-plane-x" => Ok(FuncSpec::Indicator(Region::HalfPlaneX { c: get("c", None)? })),
        other => Err(format!(
            "unknown data preset `{other}` (expected zero, constant, paper-example, sine-product, custom-gaussian, disk, half-plane-x)"
        )),
    }
}

fn parse_args(args: &str) -> Result<Vec<(String, f64)>, String> {
    let mut out = Vec::new();
    for part in args.split(',').filter(|s| !s.trim().is_empty()) {
        if let Some((k, v)) = part.split_once('=') {
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("preset parameter `{part}` is not a number"))?;
            out.push((k.trim().to_string(), value));
        } else if part.trim().parse::<f64>().is_ok() {
            // bare positional value, handled by the caller (constant)
        } else {
            return Err(format!("malformed preset parameter `{part}`"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_manifest() {
        let cfg = RunConfig::default();
        let text = cfg.manifest();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(format!("{back:?}"), format!("{cfg:?}"));
        assert_eq!(back.manifest(), text);
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::default();
        cfg.set("problem.beta", "0").unwrap();
        cfg.set("mesh.n", "16").unwrap();
        cfg.set("eoc.q_values", "[0.5, 0.31]").unwrap();
        assert_eq!(cfg.beta, 0.0);
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.q_values, vec![0.5, 0.31]);
        assert!(cfg.set("problem.unknown", "1").is_err());
    }

    #[test]
    fn invalid_q_is_reported_with_the_invariant() {
        let mut cfg = RunConfig::default();
        cfg.set("problem.q", "1.5").unwrap();
        let err = cfg.problem_spec().unwrap_err();
        assert!(err.contains("0 < q < 1"), "{err}");
    }

    #[test]
    fn func_presets_parse() {
        assert!(matches!(parse_func("zero").unwrap(), FuncSpec::Zero));
        assert!(matches!(parse_func("constant:2.5").unwrap(), FuncSpec::Constant(v) if v == 2.5));
        assert!(matches!(parse_func("paper-example").unwrap(), FuncSpec::Gaussian { amp, .. } if amp == 10.0));
        assert!(parse_func("disk:cx=0.5,cy=0.5,r=0.3").unwrap().indicator_region().is_some());
        assert!(parse_func("nonsense").is_err());
        assert!(parse_func("disk:cx=0.5").is_err());
    }
}
