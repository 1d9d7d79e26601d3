use besselbridge::ibpf::{self, McSettings};
use besselbridge::laws::bridge_expectation;
use besselbridge::quad::Tolerance;
use besselbridge::renorm::{pair_mu, renorm_gamma_integral};
use besselbridge::report::fmt;
use besselbridge::sampler::{self, PathKind};
use besselbridge::spde::{self, Model, Mollifier, SpdeSettings};
use besselbridge::specfun::gamma;
use besselbridge::{Dimension, ScalarTestFunction};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::config::{KFamilySpec, ModelSpec, PathKindSpec, RunConfig};
use crate::CliError;

/// Whether every configured tolerance was met.
pub type Verdict = bool;

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(out)?;
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn dimension(d: f64) -> Result<Dimension, CliError> {
    Dimension::new(d).map_err(|e| CliError::Config(e.to_string()))
}

pub fn verify_mu(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let c = &cfg.verify_mu;
    if c.alphas.is_empty() {
        return Err(CliError::Usage("verify_mu.alphas is empty".into()));
    }
    let builtins = ScalarTestFunction::builtins();
    let functions = c
        .functions
        .iter()
        .map(|name| {
            builtins
                .iter()
                .find(|b| b.0 == name)
                .cloned()
                .ok_or_else(|| CliError::Config(format!("unknown test function {name:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut w = csv::Writer::from_writer(create(&cfg.out, "mu.csv")?);
    w.write_record(["check", "function", "alpha", "param", "value", "expected", "residual", "status", "reason"])?;
    let mut ok = true;
    let mut row = |w: &mut csv::Writer<_>, check: &str, f: &str, a: f64, p: f64, got: besselbridge::Result<f64>, expected: f64, relative: bool| -> Result<(), CliError> {
        let p = if p.is_nan() { String::new() } else { fmt(p) };
        match got {
            Ok(v) => {
                let mut residual = (v - expected).abs();
                if relative {
                    residual /= expected.abs();
                }
                let pass = residual <= c.tolerance;
                ok &= pass;
                let status = if pass { "pass" } else { "fail" };
                w.write_record([check, f, &fmt(a), &p, &fmt(v), &fmt(expected), &fmt(residual), status, ""])?;
            }
            Err(e) => {
                w.write_record([check, f, &fmt(a), &p, "", "", "", "skipped", &e.to_string()])?;
            }
        }
        Ok(())
    };
    for &lambda in &c.lambdas {
        let phi = ScalarTestFunction::exponential(lambda).map_err(|e| CliError::Config(e.to_string()))?;
        for &a in &c.alphas {
            row(&mut w, "laplace", "exp", a, lambda, pair_mu(a, &phi), lambda.powf(-a), false)?;
        }
    }
    for (name, phi) in &functions {
        let d = phi.derivative();
        for &a in &c.alphas {
            let sum = pair_mu(a, &d).and_then(|x| Ok(x + pair_mu(a - 1.0, phi)?));
            row(&mut w, "ibp", name, a, f64::NAN, sum, 0.0, false)?;
        }
    }
    for &x in &c.gamma_x {
        for &cc in &c.gamma_c {
            let exact = gamma(x).map(|g| g * cc.powf(-x));
            match exact {
                Ok(e) => row(&mut w, "renorm_gamma", "gauss", x, cc, renorm_gamma_integral(x, cc), e, true)?,
                Err(e) => row(&mut w, "renorm_gamma", "gauss", x, cc, Err(e), f64::NAN, true)?,
            }
        }
    }
    w.flush()?;
    Ok(ok)
}

pub fn verify_ibpf(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let c = &cfg.verify_ibpf;
    let functionals = c.functionals.iter().map(|f| Ok((f.id.clone(), f.build()?))).collect::<Result<Vec<_>, CliError>>()?;
    let hs = c.h.iter().map(|h| Ok((h.id.clone(), h.build()?))).collect::<Result<Vec<_>, CliError>>()?;
    let mc = c.mc.as_ref().map(|m| McSettings { paths: m.paths, grid_points: m.grid_points, seed: cfg.seed });
    let mut reports = Vec::new();
    for &d in &c.deltas {
        let dim = dimension(d)?;
        for (fid, f) in &functionals {
            for (hid, h) in &hs {
                reports.push(ibpf::verify(&dim, (fid, f), (hid, h), c.tolerance, mc.as_ref())?);
            }
        }
    }
    ibpf::write_ibpf_csv(&reports, create(&cfg.out, "ibpf.csv")?)?;
    Ok(reports.iter().all(|r| r.passed()))
}

pub fn sample(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let c = &cfg.sample;
    let kind = match c.kind {
        PathKindSpec::Squared => PathKind::Squared,
        PathKindSpec::Bessel => PathKind::Bessel,
    };
    let paths = sampler::sample_paths(c.delta, &sampler::uniform_grid(c.grid_points), c.paths, cfg.seed, kind)?;
    sampler::write_paths_csv(&paths, create(&cfg.out, "paths.csv")?)?;

    let mut rows = Vec::new();
    for &d in &c.ks_deltas {
        for r in sampler::marginal_ks(d, &c.ks_times, c.ks_paths, cfg.seed)? {
            rows.push(("marginal".to_string(), d, r));
        }
    }
    for &[a, b] in &c.additivity {
        for r in sampler::additivity_check(a, b, &c.ks_times, c.ks_paths, cfg.seed)? {
            rows.push((format!("additivity_{}+{}", a, b), a + b, r));
        }
    }
    sampler::write_ks_csv(&rows, create(&cfg.out, "ks.csv")?)?;
    let mut ok = rows.iter().all(|r| r.2.passed());

    let mut w = csv::Writer::from_writer(create(&cfg.out, "expectations.csv")?);
    w.write_record(["delta", "phi_id", "estimate", "standard_error", "grid_bias_bound", "exact", "passed"])?;
    let grid = sampler::uniform_grid(c.expectation_grid);
    for e in &c.expectations {
        let f = e.functional.build()?;
        let exact = bridge_expectation(&dimension(e.delta)?, &f);
        let est = sampler::mc_functional_expectation(e.delta, &f, &grid, c.expectation_paths, cfg.seed)?;
        let pass = (est.estimate - exact).abs() <= 3.0 * est.standard_error + est.grid_bias_bound;
        ok &= pass;
        w.write_record([
            fmt(e.delta),
            e.functional.id.clone(),
            fmt(est.estimate),
            fmt(est.standard_error),
            fmt(est.grid_bias_bound),
            fmt(exact),
            pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(ok)
}

pub fn spde(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let c = &cfg.spde;
    let model = match (c.model, c.drift) {
        (ModelSpec::Bessel1, true) => Model::Bessel1(Mollifier::new(c.eps)?),
        _ => Model::She,
    };
    let settings = SpdeSettings {
        m: c.m,
        dt: c.dt,
        t_end: c.t_end,
        probes: c.probes.clone(),
        probe_every: c.probe_every,
        snapshot_every: c.snapshot_every,
    };
    if c.replicas == 0 {
        return Err(CliError::Usage("spde.replicas must be positive".into()));
    }
    let trajectories = spde::run_ensemble(&model, &settings, c.replicas, cfg.seed)?;
    let report = spde::stationarity_report(&trajectories, c.burn_in.unwrap_or(c.t_end / 2.0), model.law())?;
    spde::write_trajectory_csv(&trajectories, create(&cfg.out, "trajectories.csv")?)?;
    spde::write_diagnostics_csv(&report, create(&cfg.out, "diagnostics.csv")?)?;
    let mut ok = true;
    for &x in &c.check_sites {
        let site = report
            .site(x)
            .ok_or_else(|| CliError::Config(format!("check site {x} is not among the probes")))?;
        ok &= site.ks <= c.ks_tolerance;
    }
    Ok(ok)
}

pub fn distinction(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let c = &cfg.distinction;
    let tol = Tolerance::new(c.tolerance, c.tolerance);
    let ks = c.k.iter().map(|k| Ok((k, k.build()?))).collect::<Result<Vec<_>, CliError>>()?;
    let hs = c.h.iter().map(|h| Ok((h.id.clone(), h.build()?))).collect::<Result<Vec<_>, CliError>>()?;
    let mut rows = Vec::new();
    let mut ok = true;
    for (spec, k) in &ks {
        for (hid, h) in &hs {
            let d = spde::distinction_gap(k, h, &tol)?;
            if spec.family == KFamilySpec::Zero {
                ok &= d.gap.abs() <= c.zero_tolerance;
            }
            if let Some(min) = spec.min_gap {
                ok &= d.gap.abs() >= min;
            }
            rows.push((spec.id.clone(), hid.clone(), d));
        }
    }
    spde::write_distinction_csv(&rows, create(&cfg.out, "distinction.csv")?)?;
    Ok(ok)
}
