//! Subcommand bodies. Everything runs at the configured working precision
//! and writes decimal-string JSON and RFC 4180 CSV.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use singheat::analysis::{cost_sweep, degenerate_map, time_sweep, transform_solution};
use singheat::biortho::{build_family, estimate_fit};
use singheat::cache::ZeroCache;
use singheat::control::{fourier_coefficients, synthesize_with, ControlProblem};
use singheat::report::{self, dec, CsvTable};
use singheat::simulate::{reconstruct, step_crosscheck, terminal_state};
use singheat::spectrum::{build_spectrum_with, derive_params};
use singheat::verify::{self, VerifyConfig};
use singheat::{ControlMp, Error, FamilyMp, Mpf, Precision, Real, Result, SpectrumMp};

use crate::config::{Command, Datum, RunConfig};

/// Control CSV resolution when `--samples` is not given.
const DEFAULT_SAMPLES: usize = 200;

struct Context<'a> {
    cfg: &'a RunConfig,
    prec: Precision,
    cache: Option<ZeroCache>,
}

/// Runs the configured subcommand and returns the process exit status.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    let prec = Precision::new(cfg.precision_bits)?;
    let ctx = Context {
        cfg,
        prec,
        cache: cfg.cache_dir.clone().map(ZeroCache::new),
    };
    prec.scope(|| match cfg.command {
        Command::Spectrum => ctx.spectrum_cmd(),
        Command::Biortho => ctx.biortho_cmd(),
        Command::Synthesize => ctx.synthesize_cmd(),
        Command::Simulate => ctx.simulate_cmd(),
        Command::CostSweep => ctx.cost_sweep_cmd(),
        Command::TimeSweep => ctx.time_sweep_cmd(),
        Command::Transform => ctx.transform_cmd(),
        Command::Verify => ctx.verify_cmd(),
    })
}

fn number(s: &str, what: &str) -> Result<Mpf> {
    Mpf::parse_decimal(s)
        .filter(Real::is_finite)
        .ok_or_else(|| Error::Config(format!("{what}: '{s}' is not a finite decimal number")))
}

fn emit(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => report::write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn emit_json(v: &Value, path: Option<&Path>) -> Result<()> {
    emit(&report::json_bytes(v), path)
}

fn emit_csv(t: &CsvTable, path: Option<&Path>) -> Result<()> {
    emit(&t.to_bytes()?, path)
}

struct Synthesis {
    spectrum: SpectrumMp,
    problem: ControlProblem<Mpf>,
    control: ControlMp,
    u0_tail: Mpf,
}

impl Context<'_> {
    fn mu(&self) -> Result<Mpf> {
        number(self.cfg.mu.as_deref().unwrap_or_default(), "mu")
    }

    fn horizon(&self) -> Result<Mpf> {
        let t = number(self.cfg.horizon.as_deref().unwrap_or_default(), "T")?;
        if t <= Mpf::lit(0.0) {
            return Err(Error::Config("T must be positive".into()));
        }
        Ok(t)
    }

    fn spectrum(&self, mu: &Mpf) -> Result<SpectrumMp> {
        let params = derive_params(mu)?;
        build_spectrum_with(&params, self.cfg.count, &self.prec, self.cache.as_ref())
    }

    /// Modal coefficients of a datum and the L² norm of its truncated tail.
    fn modal(&self, datum: &Datum, spectrum: Option<&SpectrumMp>) -> Result<(Vec<Mpf>, Mpf)> {
        let k = self.cfg.count;
        let zero = Mpf::lit(0.0);
        let mut rho = vec![zero.clone(); k];
        match datum {
            Datum::Zero => {}
            Datum::Mode(m) => {
                if *m > k {
                    return Err(Error::Config(format!("phi:{m} is outside the K = {k} modes")));
                }
                rho[m - 1] = Mpf::lit(1.0);
            }
            Datum::Modal(list) => {
                if list.len() > k {
                    return Err(Error::Config(format!("modal list has {} entries for K = {k}", list.len())));
                }
                for (r, s) in rho.iter_mut().zip(list) {
                    *r = number(s, "modal coefficient")?;
                }
            }
            Datum::PolyBubble => {
                let spectrum = spectrum.ok_or_else(|| {
                    Error::Config("poly_bubble depends on mu; sweeps take phi:<k> or modal:<...>".into())
                })?;
                let one = Mpf::lit(1.0);
                let c = fourier_coefficients(&|x: &Mpf| x.clone() * (one.clone() - x.clone()), spectrum)?;
                return Ok((c.rho.clone(), c.tail_norm()));
            }
        }
        Ok((rho, zero))
    }

    fn family(&self, spectrum: &SpectrumMp, horizon: &Mpf) -> Result<FamilyMp> {
        build_family(&spectrum.lambdas(), horizon, &self.prec)
    }

    fn synthesis(&self) -> Result<Synthesis> {
        let spectrum = self.spectrum(&self.mu()?)?;
        let horizon = self.horizon()?;
        let (rho0, u0_tail) = self.modal(&self.cfg.u0, Some(&spectrum))?;
        let (rho_t, _) = self.modal(&self.cfg.u_t, Some(&spectrum))?;
        let family = self.family(&spectrum, &horizon)?;
        let problem = ControlProblem::new(spectrum.params.clone(), horizon, rho0, rho_t)?;
        let control = synthesize_with(&problem, &spectrum, &family, self.cfg.p)?;
        Ok(Synthesis {
            spectrum,
            problem,
            control,
            u0_tail,
        })
    }

    /// x_i = i/n for i = 1..n and t_j = jT/m for j = 0..m.
    fn grids(&self, horizon: &Mpf) -> (Vec<Mpf>, Vec<Mpf>) {
        let (n, m) = (self.cfg.xgrid, self.cfg.tgrid);
        let xs = (1..=n).map(|i| Mpf::from_count(i) / Mpf::from_count(n)).collect();
        let ts = (0..=m)
            .map(|j| horizon.clone() * Mpf::from_count(j) / Mpf::from_count(m))
            .collect();
        (xs, ts)
    }

    fn spectrum_cmd(&self) -> Result<i32> {
        let s = self.spectrum(&self.mu()?)?;
        emit_json(&report::spectrum_json(&s), self.cfg.out.as_deref())?;
        Ok(0)
    }

    fn biortho_cmd(&self) -> Result<i32> {
        let s = self.spectrum(&self.mu()?)?;
        let family = self.family(&s, &self.horizon()?)?;
        // the fit is only defined from K = 4 on
        let fit = estimate_fit(&family).ok();
        emit_json(&report::family_json(&family, fit.as_ref()), self.cfg.out.as_deref())?;
        Ok(0)
    }

    fn synthesize_cmd(&self) -> Result<i32> {
        let syn = self.synthesis()?;
        emit_json(&report::control_json(&syn.problem, &syn.control), self.cfg.out.as_deref())?;
        if let Some(csv) = &self.cfg.csv {
            let samples = self.cfg.samples.unwrap_or(DEFAULT_SAMPLES);
            emit_csv(&report::control_samples_csv(&syn.control, samples), Some(csv))?;
        }
        Ok(0)
    }

    fn simulate_cmd(&self) -> Result<i32> {
        let syn = self.synthesis()?;
        let sim = terminal_state(&syn.problem, &syn.control, &syn.spectrum, &syn.u0_tail)?;
        let cross = match self.cfg.steps {
            Some(n) => Some(step_crosscheck(&syn.problem, &syn.control, &syn.spectrum, n)?),
            None => None,
        };
        let body = json!({
            "control": report::control_json(&syn.problem, &syn.control),
            "simulation": report::simulation_json(&sim, cross.as_ref()),
        });
        emit_json(&body, self.cfg.out.as_deref())?;
        if let Some(csv) = &self.cfg.csv {
            let (xs, ts) = self.grids(&syn.problem.horizon);
            let field = reconstruct(&syn.problem, &syn.control, &syn.spectrum, &xs, &ts)?;
            emit_csv(&report::field_csv(&field), Some(csv))?;
        }
        Ok(0)
    }

    fn cost_sweep_cmd(&self) -> Result<i32> {
        let mus = self
            .cfg
            .mu_list
            .iter()
            .map(|s| number(s, "mu"))
            .collect::<Result<Vec<_>>>()?;
        let (rho0, _) = self.modal(&self.cfg.u0, None)?;
        let table = cost_sweep(&mus, &self.horizon()?, &rho0, &self.prec, self.cache.as_ref())?;
        emit_json(&report::cost_table_json(&table), self.cfg.out.as_deref())?;
        if let Some(csv) = &self.cfg.csv {
            emit_csv(&report::cost_rows_csv(&table.rows), Some(csv))?;
        }
        Ok(0)
    }

    fn time_sweep_cmd(&self) -> Result<i32> {
        let mut ts = self
            .cfg
            .horizon_list
            .iter()
            .map(|s| number(s, "T"))
            .collect::<Result<Vec<_>>>()?;
        ts.sort_by(|a, b| b.partial_cmp(a).expect("finite horizons"));
        let (rho0, _) = self.modal(&self.cfg.u0, None)?;
        let sweep = time_sweep(&self.mu()?, &ts, &rho0, &self.prec, self.cache.as_ref())?;
        emit_json(&report::time_sweep_json(&sweep), self.cfg.out.as_deref())?;
        if let Some(csv) = &self.cfg.csv {
            emit_csv(&report::cost_rows_csv(&sweep.rows), Some(csv))?;
        }
        Ok(0)
    }

    fn transform_cmd(&self) -> Result<i32> {
        let syn = self.synthesis()?;
        let map = degenerate_map(&syn.spectrum.params.mu)?;
        let (xs, ts) = self.grids(&syn.problem.horizon);
        let field = reconstruct(&syn.problem, &syn.control, &syn.spectrum, &xs, &ts)?;
        let transformed = transform_solution(&field, &map)?;
        emit_csv(&report::transformed_csv(&transformed), self.cfg.csv.as_deref())?;
        if let Some(out) = &self.cfg.out {
            let body = json!({
                "mu": dec(&map.mu),
                "beta": dec(&map.beta),
                "a": dec(&map.a),
                "xi0": map.xi0.as_ref().map_or(Value::Null, dec),
            });
            emit_json(&body, Some(out))?;
        }
        Ok(0)
    }

    fn verify_cmd(&self) -> Result<i32> {
        let config = VerifyConfig {
            precision_bits: self.cfg.precision_bits,
        };
        let rep = verify::run(&config, self.cache.as_ref())?;
        emit(rep.render().as_bytes(), None)?;
        if let Some(out) = &self.cfg.out {
            emit_json(&rep.to_json(), Some(out))?;
        }
        Ok(if rep.all_passed() { 0 } else { 1 })
    }
}
