//! Model files, complex literals, CSV/JSON exports and SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band_topology::NuReport;
use crate::error::{Error, Result};
use crate::lattice_model::{HoppingTerm, Lattice, TightBindingModel};
use crate::linalg::CMat;
use crate::spectral::DensityProfile;
use crate::symmetry::{check_symmetry, SymmetryKind, SymmetryOperator};

/// Residual above which a declared symmetry is reported as failing at load.
pub const SYMMETRY_LOAD_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoppingRecord {
    vector: Vec<i32>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymmetryRecord {
    kind: String,
    u_re: Vec<Vec<f64>>,
    u_im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    name: String,
    dimension: usize,
    orbitals: usize,
    hoppings: Vec<HoppingRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    symmetries: Vec<SymmetryRecord>,
}

/// A model file after validation.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub model: TightBindingModel,
    pub symmetries: Vec<SymmetryOperator>,
    /// One line per declared symmetry that failed re-verification.
    pub warnings: Vec<String>,
}

fn matrix_from_parts(field: &str, n: usize, re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMat> {
    let shape_ok = |m: &[Vec<f64>]| m.len() == n && m.iter().all(|r| r.len() == n);
    if !shape_ok(re) || !shape_ok(im) {
        return Err(Error::Parse(format!("{field}: re and im must both be {n}x{n}")));
    }
    Ok(Mat::from_fn(n, n, |i, j| Complex64::new(re[i][j], im[i][j])))
}

fn matrix_parts(m: &CMat) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |f: fn(Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(m[(i, j)])).collect()).collect()
    };
    (rows(|z| z.re), rows(|z| z.im))
}

/// Parse and validate a model from JSON text.
pub fn parse_model_str(text: &str) -> Result<LoadedModel> {
    let rec: ModelRecord = serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    let mut terms = Vec::with_capacity(rec.hoppings.len());
    for (i, h) in rec.hoppings.iter().enumerate() {
        let m = matrix_from_parts(&format!("hoppings[{i}]"), rec.orbitals, &h.re, &h.im)?;
        terms.push(HoppingTerm::new(h.vector.clone(), m));
    }
    let model = TightBindingModel::new(rec.name, rec.dimension, rec.orbitals, terms)?;
    let mut symmetries = Vec::new();
    let mut warnings = Vec::new();
    for (i, s) in rec.symmetries.iter().enumerate() {
        let kind: SymmetryKind = s.kind.parse().map_err(|_| Error::Parse(format!("symmetries[{i}].kind: unknown kind '{}'", s.kind)))?;
        let u = matrix_from_parts(&format!("symmetries[{i}]"), rec.orbitals, &s.u_re, &s.u_im)?;
        let op = SymmetryOperator::new(kind, u)?;
        let check = check_symmetry(&op, &model, SYMMETRY_LOAD_TOL)?;
        if !check.holds {
            warnings.push(format!("declared {kind} fails: max residual {:.3e}", check.max_residual));
        }
        symmetries.push(op);
    }
    Ok(LoadedModel { model, symmetries, warnings })
}

pub fn parse_model_file(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_model_str(&text)
}

/// Serialize a model in the model-file schema. Hoppings come out sorted by vector.
pub fn model_to_json(model: &TightBindingModel, symmetries: &[SymmetryOperator]) -> String {
    let rec = ModelRecord {
        name: model.name().to_string(),
        dimension: model.dimension(),
        orbitals: model.orbitals(),
        hoppings: model
            .hoppings()
            .map(|(v, m)| {
                let (re, im) = matrix_parts(m);
                HoppingRecord { vector: v.clone(), re, im }
            })
            .collect(),
        symmetries: symmetries
            .iter()
            .map(|op| {
                let (u_re, u_im) = matrix_parts(op.u());
                SymmetryRecord { kind: op.kind.as_str().to_string(), u_re, u_im }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&rec).expect("model record serializes")
}

/// Parse `a`, `a+bi`, `a-bi` or `bi` (no spaces). `i` alone means 1i.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || Error::Parse(format!("bad complex literal '{s}' (expected a, a+bi, a-bi or bi)"));
    if s.is_empty() || s.contains(char::is_whitespace) {
        return Err(bad());
    }
    let real = |t: &str| t.parse::<f64>().ok().filter(|x| x.is_finite());
    let imag = |t: &str| -> Option<f64> {
        let body = t.strip_suffix('i')?;
        match body {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => real(body),
        }
    };
    if !s.ends_with('i') {
        return real(s).map(|re| Complex64::new(re, 0.0)).ok_or_else(bad);
    }
    // split at the last sign that is not a leading sign or an exponent sign
    let bytes = s.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&p| (bytes[p] == b'+' || bytes[p] == b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
    match split {
        Some(p) => {
            let re = real(&s[..p]).ok_or_else(bad)?;
            let im = imag(&s[p..]).ok_or_else(bad)?;
            Ok(Complex64::new(re, im))
        }
        None => imag(s).map(|im| Complex64::new(0.0, im)).ok_or_else(bad),
    }
}

/// Format a complex number as a literal `parse_complex` accepts.
pub fn format_complex(z: Complex64) -> String {
    if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Comma-separated reals, e.g. `0.1,-0.3`.
pub fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse(format!("bad real '{t}' in '{s}'")))
        })
        .collect()
}

pub fn spectrum_csv(values: &[Complex64]) -> String {
    let mut out = String::from("re,im\n");
    for z in values {
        let _ = writeln!(out, "{},{}", z.re, z.im);
    }
    out
}

/// Site coordinates are zero-based.
pub fn profile_csv(profile: &DensityProfile) -> String {
    let d = profile.sizes.len();
    let mut out: String = (1..=d).map(|a| format!("x_{a},")).collect();
    out.push_str("prob\n");
    let lat = Lattice::new(profile.sizes.clone());
    for (i, p) in profile.values.iter().enumerate() {
        for c in lat.coords(i) {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{p}");
    }
    out
}

/// `k_transverse,nu`; an empty first column in 1D, space-separated components above 2D.
pub fn nu_csv(reports: &[NuReport]) -> String {
    let mut out = String::from("k_transverse,nu\n");
    for r in reports {
        let k: Vec<String> = r.transverse.iter().map(|k| k.to_string()).collect();
        let nu = r.nu.map_or_else(|| "ill_defined".to_string(), |v| v.to_string());
        let _ = writeln!(out, "{},{nu}", k.join(" "));
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

const SVG_SIZE: f64 = 480.0;
const SVG_MARGIN: f64 = 40.0;

fn svg_header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = SVG_SIZE
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        SVG_SIZE / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Scatter plot of eigenvalues in the complex plane, equal aspect.
pub fn spectrum_svg(values: &[Complex64], title: &str) -> String {
    let mut out = String::new();
    svg_header(&mut out, title);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in values {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    if values.is_empty() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9) * 1.1;
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let plot = SVG_SIZE - 2.0 * SVG_MARGIN;
    let px = |x: f64| SVG_MARGIN + (x - cx + span / 2.0) / span * plot;
    let py = |y: f64| SVG_MARGIN + (cy + span / 2.0 - y) / span * plot;
    let _ = writeln!(
        out,
        r#"<rect x="{m}" y="{m}" width="{p}" height="{p}" fill="none" stroke="black"/>"#,
        m = SVG_MARGIN,
        p = plot
    );
    // axes through the origin when visible
    if (cx - span / 2.0..=cx + span / 2.0).contains(&0.0) {
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#bbb"/>"##, SVG_MARGIN, SVG_MARGIN + plot, x = px(0.0));
    }
    if (cy - span / 2.0..=cy + span / 2.0).contains(&0.0) {
        let _ = writeln!(out, r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#bbb"/>"##, SVG_MARGIN, SVG_MARGIN + plot, y = py(0.0));
    }
    for z in values {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f4e9c"/>"##, px(z.re), py(z.im));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">Re E [{:.3}, {:.3}]   Im E [{:.3}, {:.3}]</text>"#,
        SVG_SIZE / 2.0,
        SVG_SIZE - 12.0,
        cx - span / 2.0,
        cx + span / 2.0,
        cy - span / 2.0,
        cy + span / 2.0
    );
    out.push_str("</svg>\n");
    out
}

/// Heat map of a 2D density on a log color scale; x runs right, y runs up.
pub fn profile_svg(profile: &DensityProfile, title: &str) -> Result<String> {
    let [nx, ny] = profile.sizes[..] else {
        return Err(Error::DimensionMismatch(format!(
            "heat maps need a 2D profile, got {} axes",
            profile.sizes.len()
        )));
    };
    let mut out = String::new();
    svg_header(&mut out, title);
    let plot = SVG_SIZE - 2.0 * SVG_MARGIN;
    let cell = plot / nx.max(ny) as f64;
    let max = profile.values.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let floor = 1e-12f64;
    let lat = Lattice::new(profile.sizes.clone());
    for (i, &p) in profile.values.iter().enumerate() {
        let c = lat.coords(i);
        let t = ((p / max).max(floor).log10() - floor.log10()) / -floor.log10();
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{w:.2}" fill="{}"/>"#,
            SVG_MARGIN + c[0] as f64 * cell,
            SVG_MARGIN + (ny - 1 - c[1]) as f64 * cell,
            ramp(t),
            w = cell
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// White to dark red.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 140.0), lerp(255.0, 10.0), lerp(255.0, 20.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::model_zoo::build_with;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1.5").unwrap(), c(1.5, 0.0));
        assert_eq!(parse_complex("1.87+0.64i").unwrap(), c(1.87, 0.64));
        assert_eq!(parse_complex("3.19-0.80i").unwrap(), c(3.19, -0.80));
        assert_eq!(parse_complex("-2i").unwrap(), c(0.0, -2.0));
        assert_eq!(parse_complex("-8.09").unwrap(), c(-8.09, 0.0));
        assert_eq!(parse_complex("1e-3+2E+2i").unwrap(), c(1e-3, 200.0));
        assert_eq!(parse_complex("2.65+i").unwrap(), c(2.65, 1.0));
        for bad in ["", "1 + 2i", "abc", "1+2j", "1+2i3", "nan", "1++2i"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn complex_format_round_trips() {
        for z in [c(1.0, -0.5), c(-3.25, 0.0), c(0.0, 2.0), c(1e-12, -7e5)] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }

    #[test]
    fn reals_list() {
        assert_eq!(parse_reals("0.1,-0.3").unwrap(), vec![0.1, -0.3]);
        assert!(parse_reals("0.1,,2").is_err());
    }

    #[test]
    fn zoo_export_round_trips() {
        for id in ["eq18", "eq16", "s47"] {
            let b = build_with(id, &[]).unwrap();
            let text = model_to_json(&b.model, &b.symmetries);
            let loaded = parse_model_str(&text).unwrap();
            assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
            assert_eq!(loaded.model.name(), b.model.name());
            let a: Vec<_> = b.model.hoppings().collect();
            let l: Vec<_> = loaded.model.hoppings().collect();
            assert_eq!(a.len(), l.len());
            for ((va, ma), (vl, ml)) in a.iter().zip(&l) {
                assert_eq!(va, vl);
                assert_eq!(max_abs_diff(ma, ml), 0.0);
            }
            assert_eq!(model_to_json(&loaded.model, &loaded.symmetries), text);
        }
    }

    #[test]
    fn duplicate_vector_rejected() {
        let text = r#"{"name":"d","dimension":1,"orbitals":1,"hoppings":[
            {"vector":[1],"re":[[1.0]],"im":[[0.0]]},
            {"vector":[1],"re":[[2.0]],"im":[[0.0]]}]}"#;
        match parse_model_str(text) {
            Err(Error::InvariantViolation(m)) => assert!(m.contains("duplicate vector"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn broken_symmetry_loads_with_warning() {
        let b = build_with("eq16", &[]).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&model_to_json(&b.model, &b.symmetries)).unwrap();
        let x = v["hoppings"][0]["im"][0][0].as_f64().unwrap();
        v["hoppings"][0]["im"][0][0] = (x + 1e-3).into();
        let loaded = parse_model_str(&v.to_string()).unwrap();
        assert_eq!(loaded.warnings.len(), 1, "{:?}", loaded.warnings);
        assert!(loaded.warnings[0].contains("trs"));
    }

    #[test]
    fn parse_errors_carry_context() {
        let e = parse_model_str(r#"{"name":"x","dimension":1,"hoppings":[]}"#).unwrap_err();
        assert!(matches!(&e, Error::Parse(m) if m.contains("orbitals")), "{e}");
        let e = parse_model_str(r#"{"name":"x","dimension":1,"orbitals":2,"hoppings":[{"vector":[0],"re":[[1]],"im":[[0]]}]}"#)
            .unwrap_err();
        assert!(matches!(&e, Error::Parse(m) if m.contains("hoppings[0]")), "{e}");
        let e = parse_model_str("{\n\"name\": 3}").unwrap_err();
        assert!(matches!(&e, Error::Parse(m) if m.contains("line 2")), "{e}");
    }

    #[test]
    fn csv_shapes() {
        let s = spectrum_csv(&[c(1.0, 2.0), c(-0.5, 0.0)]);
        assert_eq!(s, "re,im\n1,2\n-0.5,0\n");
        let p = DensityProfile { sizes: vec![2, 2], values: vec![0.1, 0.2, 0.3, 0.4] };
        let csv = profile_csv(&p);
        assert_eq!(csv.lines().next(), Some("x_1,x_2,prob"));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().nth(2), Some("0,1,0.2"));
    }

    #[test]
    fn svg_is_well_formed() {
        let s = spectrum_svg(&[c(1.0, 2.0), c(-1.0, -2.0)], "a < b");
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.contains("a &lt; b"));
        let p = DensityProfile { sizes: vec![3, 2], values: vec![1.0 / 6.0; 6] };
        assert_eq!(profile_svg(&p, "h").unwrap().matches("<rect").count(), 1 + 6);
        let p1 = DensityProfile { sizes: vec![3], values: vec![1.0 / 3.0; 3] };
        assert!(profile_svg(&p1, "h").is_err());
    }
}
