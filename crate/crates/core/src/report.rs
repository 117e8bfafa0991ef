//! Output formats. Every floating value leaves the library as a decimal
//! string at its own precision; JSON objects have sorted keys and CSV follows
//! RFC 4180 (CRLF records, quoting only where needed).

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::analysis::{CostRow, CostTable, ExponentFit, TimeSweep, TransformedField};
use crate::biortho::{BiorthogonalFamily, NormFit};
use crate::control::{ControlProblem, SynthesizedControl};
use crate::error::Result;
use crate::scalar::Real;
use crate::simulate::{FieldSamples, SimulationReport};
use crate::spectrum::Spectrum;

pub fn dec<T: Real>(x: &T) -> Value {
    Value::String(x.to_decimal())
}

pub fn dec_vec<T: Real>(xs: &[T]) -> Value {
    Value::Array(xs.iter().map(dec).collect())
}

fn opt_dec<T: Real>(x: &Option<T>) -> Value {
    x.as_ref().map_or(Value::Null, dec)
}

/// f64 summaries (fits, exponents) are written with 17 significant digits.
pub fn dec_f64(x: f64) -> Value {
    if x.is_finite() {
        Value::String(format!("{x:.16e}"))
    } else {
        Value::Null
    }
}

/// Pretty JSON followed by a newline.
pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("values serialize");
    out.push(b'\n');
    out
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Header plus string records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        let io = |e: csv::Error| std::io::Error::other(e);
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

pub fn spectrum_json<T: Real>(s: &Spectrum<T>) -> Value {
    let modes: Vec<Value> = s
        .modes
        .iter()
        .map(|m| {
            json!({
                "k": m.k,
                "j": dec(&m.j),
                "lambda": dec(&m.lambda),
                "c_norm": dec(&m.c_norm),
                "r": dec(&m.r),
            })
        })
        .collect();
    json!({
        "mu": dec(&s.params.mu),
        "nu": dec(&s.params.nu),
        "alpha": dec(&s.params.alpha),
        "precision_bits": s.precision.mantissa_bits,
        "modes": modes,
    })
}

pub fn family_json<T: Real>(f: &BiorthogonalFamily<T>, fit: Option<&NormFit<T>>) -> Value {
    let sigmas: Vec<Value> = f.sigmas.iter().map(|s| dec_vec(&s.coeffs)).collect();
    let scaled: Vec<T> = (0..f.len()).map(|k| f.scaled_norm(k)).collect();
    json!({
        "T": dec(&f.horizon),
        "rates": dec_vec(&f.rates),
        "zero_mean": f.zero_mean,
        "coefficients": sigmas,
        "gram_condition": dec(&f.gram_condition),
        "min_pivot": dec(&f.min_pivot),
        "biorthogonality_residual": dec(&f.biorthogonality_residual()),
        "zero_mean_residual": dec(&f.zero_mean_residual()),
        "scaled_norms": dec_vec(&scaled),
        "fit": fit.map(|n| json!({
            "C_fit": dec_f64(n.c_fit),
            "P_fit": dec_f64(n.p_fit),
            "r_squared": dec_f64(n.r_squared),
            "lower_bounds": dec_vec(&n.lower_bounds),
            "lower_bounds_hold": n.lower_bounds_hold,
        })),
    })
}

pub fn control_json<T: Real>(p: &ControlProblem<T>, c: &SynthesizedControl<T>) -> Value {
    json!({
        "mu": dec(&p.params.mu),
        "T": dec(&p.horizon),
        "K": p.count(),
        "rates": dec_vec(&c.g.rates),
        "coefficients": dec_vec(&c.g.coeffs),
        "h1_norm": dec(&c.h1_norm),
        "f_l2_norm": dec(&c.f_l2_norm),
        "g_l2_norm": dec(&c.g_l2_norm),
        "f_end": dec(&c.f_end),
        "moment_residuals": dec_vec(&c.moment_residuals),
        "admissibility_score": c.admissibility_score.map_or(Value::Null, dec_f64),
        "P_used": c.p_used.map_or(Value::Null, dec_f64),
    })
}

/// f and g on `samples + 1` uniform times in [0, T].
pub fn control_samples_csv<T: Real>(c: &SynthesizedControl<T>, samples: usize) -> CsvTable {
    let mut t = CsvTable::new(&["t", "f", "g"]);
    let n = samples.max(1);
    for i in 0..=n {
        let ti = c.g.horizon.clone() * T::from_count(i) / T::from_count(n);
        t.push(vec![ti.to_decimal(), c.f_at(&ti).to_decimal(), c.g_at(&ti).to_decimal()]);
    }
    t
}

pub fn simulation_json<T: Real>(r: &SimulationReport<T>, crosscheck: Option<&T>) -> Value {
    json!({
        "beta_T": dec_vec(&r.beta_t),
        "terminal_error_l2": dec(&r.terminal_error_l2),
        "tail_bound": dec(&r.tail_bound),
        "f_T": dec(&r.f_end),
        "crosscheck_deviation": crosscheck.map_or(Value::Null, dec),
    })
}

/// Long format (x, t, u).
pub fn field_csv<T: Real>(f: &FieldSamples<T>) -> CsvTable {
    let mut t = CsvTable::new(&["x", "t", "u"]);
    for (ti, row) in f.ts.iter().zip(&f.u) {
        for (x, u) in f.xs.iter().zip(row) {
            t.push(vec![x.to_decimal(), ti.to_decimal(), u.to_decimal()]);
        }
    }
    t
}

/// Long format (ξ, t, φ).
pub fn transformed_csv<T: Real>(f: &TransformedField<T>) -> CsvTable {
    let mut t = CsvTable::new(&["xi", "t", "phi"]);
    for (ti, row) in f.ts.iter().zip(&f.phi) {
        for (xi, p) in f.xi.iter().zip(row) {
            t.push(vec![xi.to_decimal(), ti.to_decimal(), p.to_decimal()]);
        }
    }
    t
}

fn cost_row_json<T: Real>(r: &CostRow<T>) -> Value {
    json!({
        "mu": dec(&r.mu),
        "T": dec(&r.horizon),
        "K": r.count,
        "h1_norm": opt_dec(&r.h1_norm),
        "f_l2_norm": opt_dec(&r.f_l2_norm),
        "product": opt_dec(&r.product),
        "lower_bound": opt_dec(&r.lower_bound),
        "bound_holds": r.bound_holds,
        "error": r.error,
    })
}

pub fn cost_rows_csv<T: Real>(rows: &[CostRow<T>]) -> CsvTable {
    let mut t = CsvTable::new(&["mu", "T", "K", "h1_norm", "product", "lower_bound", "bound_holds", "error"]);
    let s = |x: &Option<T>| x.as_ref().map(Real::to_decimal).unwrap_or_default();
    for r in rows {
        t.push(vec![
            r.mu.to_decimal(),
            r.horizon.to_decimal(),
            r.count.to_string(),
            s(&r.h1_norm),
            s(&r.product),
            s(&r.lower_bound),
            r.bound_holds.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

fn exponent_fit_json(f: &ExponentFit) -> Value {
    json!({
        "exponent": dec_f64(f.exponent),
        "intercept": dec_f64(f.intercept),
        "r_squared": dec_f64(f.r_squared),
        "reference_exponent": dec_f64(crate::analysis::REFERENCE_EXPONENT),
        "deviation": dec_f64(f.deviation),
        "flagged": f.flagged,
    })
}

pub fn cost_table_json<T: Real>(t: &CostTable<T>) -> Value {
    json!({
        "rows": t.rows.iter().map(cost_row_json).collect::<Vec<_>>(),
        "fit": t.fit.as_ref().map(exponent_fit_json),
        "wronskian_fit": t.wronskian_fit.as_ref().map(exponent_fit_json),
    })
}

pub fn time_sweep_json<T: Real>(t: &TimeSweep<T>) -> Value {
    json!({
        "rows": t.rows.iter().map(cost_row_json).collect::<Vec<_>>(),
        "C_fit": t.c_fit.map_or(Value::Null, dec_f64),
        "r_squared": t.r_squared.map_or(Value::Null, dec_f64),
        "increasing": t.increasing,
    })
}
