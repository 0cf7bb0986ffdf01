use std::path::Path;

use spotfactor_core::diagnostics::{
    acf, posterior_predictive_pvalues, quantile_fan, summarize_chain, PVALUE_NAMES,
};
use spotfactor_core::mcmc::{
    params_from_values, run_chain_to_dir, run_chains_to_dir, ChainOutput, ChainSummary, McmcConfig,
    CHAIN_FILE,
};
use spotfactor_core::likelihood::PriorSpec;
use spotfactor_core::model::{simulate_spot, ModelSpec};
use spotfactor_core::pricing::{futures_price, FactorLevels, RiskPremia};
use spotfactor_core::rng::derive_seed;
use spotfactor_core::seasonality::{deseasonalize, fit_seasonal_dates, r_squared, SeasonalCoefficients};
use spotfactor_core::series::{load_csv, split, write_csv, PriceSeries, SplitSpec};

use crate::artifacts::*;
use crate::{CalibrateArgs, DiagnoseArgs, FitSeasonalArgs, PriceArgs, SimulateArgs};

fn load_window(path: &Path, date: &str, column: &str, split_at: Option<chrono::NaiveDate>) -> CliResult<PriceSeries> {
    let series = load_csv(path, date, column)?;
    Ok(match split_at {
        Some(d) => split(&series, SplitSpec { split_date: d })?.0,
        None => series,
    })
}

pub fn fit_seasonal(a: &FitSeasonalArgs) -> CliResult {
    let series = load_csv(&a.input, &a.date_column, &a.price_column)?;
    let window = match a.split {
        Some(d) => split(&series, SplitSpec { split_date: d })?.0,
        None => series.clone(),
    };
    let coeffs = fit_seasonal_dates(&window, &a.knots)?;
    let x = deseasonalize(&series, &coeffs)?;

    create_dir(&a.out)?;
    write_json(&a.out.join(SEASONAL_FILE), &coeffs)?;
    let mut buf = Vec::new();
    write_csv(&x, "x", &mut buf)?;
    write_file(&a.out.join(DESEASONALIZED_FILE), &buf)?;

    println!("R2 {:.6}", r_squared(&window, &coeffs));
    for (k, s) in coeffs.segment_slopes().iter().enumerate() {
        println!("segment {k} slope {s:.6}");
    }
    Ok(())
}

pub fn calibrate(a: &CalibrateArgs) -> CliResult {
    let series = load_window(&a.input, "date", &a.column, a.split)?;
    let mut spec = ModelSpec::new(a.variant, series.horizon());
    if let Some(d) = a.change_point {
        spec = spec.with_change_point(series.grid_time_of(d));
    }
    spec.validate()?;
    let priors = match &a.priors {
        Some(p) => PriorSpec::load(p)?,
        None => PriorSpec::default(),
    };
    let mut config = match &a.mcmc {
        Some(p) => McmcConfig::load(p)?,
        None => McmcConfig::default(),
    };
    if let Some(p) = a.preset {
        config.apply_preset(p, a.variant);
    }
    if let Some(s) = a.seed {
        config.rng_seed = s;
    }
    config.validate()?;
    if a.chains == 0 {
        return Err(Failure::input("--chains must be at least 1"));
    }

    let data = series.values();
    let dt = series.dt();
    let summaries = match &a.resume {
        Some(ck) => {
            if a.chains > 1 {
                return Err(Failure::input("--resume continues a single chain"));
            }
            require(ck)?;
            vec![run_chain_to_dir(data, dt, &spec, &priors, &config, 0, &a.out, Some(ck))?]
        }
        None => run_chains_to_dir(data, dt, &spec, &priors, &config, a.chains, &a.out)?,
    };

    // pooled posterior means; chains retain equally many records
    let n_params = summaries[0].params.len();
    let means: Vec<f64> = (0..n_params)
        .map(|k| summaries.iter().map(|s| s.params[k].mean).sum::<f64>() / summaries.len() as f64)
        .collect();
    let model = ModelFile {
        spec,
        params: params_from_values(&means, &spec),
    };
    write_json(&a.out.join(MODEL_FILE), &model)?;
    write_json(
        &a.out.join(RUN_FILE),
        &RunInfo {
            input: a.input.clone(),
            start_date: series.start_date(),
            end_date: series.end_date(),
            n_observations: series.len(),
            chains: a.chains,
            seed: config.rng_seed,
        },
    )?;

    for s in &summaries {
        print_summary(s);
    }
    Ok(())
}

fn print_summary(s: &ChainSummary) {
    println!("records {}", s.n_records);
    for p in &s.params {
        println!("{:<14} mean {:>14.6} sd {:>12.6}", p.name, p.mean, p.sd);
    }
    for (name, v) in PVALUE_NAMES.iter().zip(s.pvalues.values()) {
        if let Some(v) = v {
            println!("{name:<14} {v:.4}");
        }
    }
}

pub fn simulate(a: &SimulateArgs) -> CliResult {
    let model: ModelFile = read_json(&a.model)?;
    let coeffs: SeasonalCoefficients = read_json(&a.seasonal)?;
    coeffs.validate()?;
    if a.days == 0 {
        return Err(Failure::input("--days must be at least 1"));
    }
    if a.paths < 2 {
        return Err(Failure::input("--paths must be at least 2"));
    }
    if a.max_lag >= a.days {
        return Err(Failure::input("--max-lag must be below --days"));
    }
    let dt = spotfactor_core::series::DAILY_DT;
    let spec = ModelSpec {
        horizon: a.days as f64 * dt,
        ..model.spec
    };

    let mut prices = Vec::with_capacity(a.paths);
    // None once a path is constant and its autocorrelation undefined
    let mut acf_sum = Some(vec![0.0; a.max_lag + 1]);
    for k in 0..a.paths {
        let p = simulate_spot(&model.params, &coeffs, &spec, a.days, dt, derive_seed(a.seed, k as u64))?;
        if let Some(sum) = &mut acf_sum {
            match acf(&p.deseasonalized(), a.max_lag) {
                Ok(r) => sum.iter_mut().zip(r).for_each(|(s, v)| *s += v),
                Err(_) => acf_sum = None,
            }
        }
        if k == 0 {
            write_path(&a.out, &p, coeffs.start_date)?;
        }
        prices.push(p.price);
    }

    create_dir(&a.out)?;
    let bands = quantile_fan(&prices, &a.levels)?;
    let rows = (0..=a.days).flat_map(|i| {
        let bands = &bands;
        a.levels.iter().enumerate().map(move |(l, level)| {
            vec![(i as f64 * dt).to_string(), level.to_string(), bands[l][i].to_string()]
        })
    });
    write_rows(&a.out.join(FAN_FILE), &["t", "level", "value"], rows)?;
    let Some(acf_sum) = acf_sum else {
        eprintln!("note: constant simulated path, {ACF_FILE} not written");
        return Ok(());
    };
    let n = a.paths as f64;
    write_rows(
        &a.out.join(ACF_FILE),
        &["lag", "value"],
        acf_sum.iter().enumerate().map(|(k, s)| vec![k.to_string(), (s / n).to_string()]),
    )
}

fn write_path(dir: &Path, p: &spotfactor_core::model::SpotPath, start: Option<chrono::NaiveDate>) -> CliResult {
    create_dir(dir)?;
    let rows = (0..p.len()).map(|i| {
        let date = start.map_or(String::new(), |d| (d + chrono::Days::new(i as u64)).to_string());
        let mut r = vec![date, p.time_at(i).to_string()];
        r.extend([p.f[i], p.y1[i], p.y2[i], p.j1[i], p.j2[i], p.price[i]].iter().map(f64::to_string));
        r
    });
    write_rows(
        &dir.join(PATH_FILE),
        &["date", "t", "f", "y1", "y2", "j1", "j2", "price"],
        rows,
    )
}

pub fn diagnose(a: &DiagnoseArgs) -> CliResult {
    let chain = ChainOutput::load(require(&a.run.join(CHAIN_FILE))?)?;
    let summary = summarize_chain(&chain)?;
    let pvalues = posterior_predictive_pvalues(&chain.pvalue_records())?;

    create_dir(&a.out)?;
    write_rows(
        &a.out.join(POSTERIOR_FILE),
        &["name", "mean", "sd"],
        summary.iter().map(|p| vec![p.name.clone(), p.mean.to_string(), p.sd.to_string()]),
    )?;
    write_rows(
        &a.out.join(PVALUES_FILE),
        &["name", "value"],
        PVALUE_NAMES
            .iter()
            .zip(pvalues.values())
            .map(|(n, v)| vec![n.to_string(), v.map_or(String::new(), |v| v.to_string())]),
    )?;
    if let Some(input) = &a.input {
        let x = load_csv(input, "date", &a.column)?;
        let r = acf(x.values(), a.max_lag)?;
        write_rows(
            &a.out.join(ACF_FILE),
            &["lag", "value"],
            r.iter().enumerate().map(|(k, v)| vec![k.to_string(), v.to_string()]),
        )?;
    }
    Ok(())
}

pub fn price(a: &PriceArgs) -> CliResult {
    let model: ModelFile = read_json(&a.model)?;
    let premia: RiskPremia = read_json(&a.premia)?;
    let coeffs: SeasonalCoefficients = read_json(&a.seasonal)?;
    let state: FactorLevels = match &a.state {
        Some(p) => read_json(p)?,
        None => FactorLevels::default(),
    };
    model.params.validate(&model.spec)?;
    coeffs.validate()?;

    let mut rows = Vec::with_capacity(a.maturities.len());
    for &big_t in &a.maturities {
        let p = futures_price(&model.spec, &model.params, &premia, &coeffs, &state, a.t, big_t)?;
        rows.push(vec![a.t.to_string(), big_t.to_string(), p.to_string()]);
    }
    create_dir(&a.out)?;
    write_rows(&a.out.join(FUTURES_FILE), &["t", "T", "price"], rows)
}
