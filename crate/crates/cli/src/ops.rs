//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use binshrink::estimators::{
    run_estimator, EstimatorKind, EstimatorSettings, FitConfig, HbConfig,
};
use binshrink::gof::{
    bh_fdr, familywise_pstar, multi_period_chisq, qualifying_matrix, streakiness_scan,
    two_period_z, ChisqStat,
};
use binshrink::ingest::{
    aggregate, build_split, load_dataset, Cohort, EligibilityRule, PeriodScheme, PlayerId,
    PlayerRecord, SplitTables,
};
use binshrink::numerics::{ks_test, normal_cdf, normal_quantile, KsNull, KsSided};
use binshrink::report::{build_reports, render_table, reports_to_csv, Criterion, ScoringContext};
use binshrink::sim::{
    attempt_arrays, benchmark, AttemptSource, NoiseModel, SimSpec, SyntheticAttempts, ThetaModel,
};
use binshrink::transform::{exact_bias, exact_var_ratio, TransformConfig, TransformedSample};
use binshrink::validate::ValidationSet;

use crate::{
    manifest, BreakevenArgs, CurvesArgs, FitArgs, GofArgs, RunError, ScanArgs, SimulateArgs,
    SplitArgs, ValidateArgs, DATA_ENV,
};

type Result<T> = std::result::Result<T, RunError>;

fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn resolve_data(flag: &Option<PathBuf>) -> Result<PathBuf> {
    let path = match flag {
        Some(p) => p.clone(),
        None => match std::env::var_os(DATA_ENV) {
            Some(v) => PathBuf::from(v),
            None => {
                return Err(config_err(format!(
                    "--data is required (or set ${DATA_ENV})"
                )))
            }
        },
    };
    if !path.is_file() {
        return Err(RunError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("data file '{}' not found (--data)", path.display()),
        )));
    }
    Ok(path)
}

fn load_records(path: &Path) -> Result<Vec<PlayerRecord>> {
    let file = fs::File::open(path)?;
    Ok(load_dataset(file)?)
}

fn make_scheme(name: &str) -> Result<PeriodScheme> {
    match name {
        "months" => Ok(PeriodScheme::months()),
        "halves" => Ok(PeriodScheme::halves()),
        "five-one" => Ok(PeriodScheme::five_one()),
        "month-one" => Ok(PeriodScheme::month_one()),
        "ten-day" => Ok(PeriodScheme::ten_day()),
        other => Err(config_err(format!(
            "unknown --scheme '{other}' (months, halves, five-one, month-one, ten-day)"
        ))),
    }
}

fn parse_cohort(name: &str) -> Result<Cohort> {
    name.parse::<Cohort>()
        .map_err(|e| config_err(format!("--cohort: {e}")))
}

fn parse_estimators(spec: &str) -> Result<Vec<EstimatorKind>> {
    if spec == "all" {
        return Ok(EstimatorKind::all().to_vec());
    }
    spec.split(',')
        .map(|tag| {
            tag.trim()
                .parse::<EstimatorKind>()
                .map_err(|e| config_err(format!("--estimators: {e}")))
        })
        .collect()
}

fn parse_criteria(spec: &str) -> Result<Vec<Criterion>> {
    if spec == "all" {
        return Ok(Criterion::all().to_vec());
    }
    spec.split(',')
        .map(|tag| {
            tag.trim()
                .parse::<Criterion>()
                .map_err(|e| config_err(format!("--criteria: {e}")))
        })
        .collect()
}

fn parse_f64_list(spec: &str, flag: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| config_err(format!("{flag}: '{tok}' {e}")))
        })
        .collect()
}

fn parse_u32_list(spec: &str, flag: &str) -> Result<Vec<u32>> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u32>()
                .map_err(|e| config_err(format!("{flag}: '{tok}' {e}")))
        })
        .collect()
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn settings_from(args: &crate::EstimatorArgs) -> EstimatorSettings {
    EstimatorSettings {
        fit: FitConfig {
            tol: args.tol,
            max_iter: args.max_iter,
        },
        npeb_h: args.h,
        hb: HbConfig {
            mu_nodes: args.mu_nodes,
            omega_nodes: args.omega_nodes,
            ..HbConfig::default()
        },
    }
}

fn split_manifest(split: &SplitArgs) -> Vec<(String, String)> {
    vec![
        ("scheme".into(), split.scheme.clone()),
        ("cohort".into(), split.cohort.clone()),
        ("min-ab-train".into(), split.min_ab_train.to_string()),
        ("min-ab-test".into(), split.min_ab_test.to_string()),
    ]
}

fn estimator_manifest(args: &crate::EstimatorArgs) -> Vec<(String, String)> {
    let mut entries = vec![
        ("estimators".into(), args.estimators.clone()),
        ("c".into(), args.c.to_string()),
        ("mu-nodes".into(), args.mu_nodes.to_string()),
        ("omega-nodes".into(), args.omega_nodes.to_string()),
        ("tol".into(), args.tol.to_string()),
        ("max-iter".into(), args.max_iter.to_string()),
    ];
    if let Some(h) = args.h {
        entries.push(("h".into(), h.to_string()));
    }
    entries
}

/// Load, aggregate and split a dataset for fitting.
fn prepare_split(
    data: &Option<PathBuf>,
    split_args: &SplitArgs,
) -> Result<(PathBuf, SplitTables)> {
    let path = resolve_data(data)?;
    let records = load_records(&path)?;
    let scheme = make_scheme(&split_args.scheme)?;
    let table = aggregate(&records, &scheme)?;
    let rule = EligibilityRule::new(
        split_args.min_ab_train,
        split_args.min_ab_test,
        None,
    )?;
    let cohort = parse_cohort(&split_args.cohort)?;
    let split = build_split(&table, &rule, cohort)?;
    Ok((path, split))
}

fn fit_all(
    sample: &TransformedSample,
    kinds: &[EstimatorKind],
    settings: &EstimatorSettings,
) -> Result<Vec<binshrink::estimators::EstimateVector>> {
    kinds
        .iter()
        .map(|k| run_estimator(*k, sample, settings).map_err(RunError::from))
        .collect()
}

fn estimates_csv(fitted: &[binshrink::estimators::EstimateVector]) -> String {
    let mut out = String::from("player_id,estimator,delta,delta_prop\n");
    for vec in fitted {
        for (id, delta) in &vec.entries {
            out.push_str(&format!(
                "{},{},{:.9},{:.9}\n",
                id,
                vec.estimator.tag(),
                delta,
                delta.sin().powi(2)
            ));
        }
    }
    out
}

pub fn curves(args: CurvesArgs) -> Result<()> {
    let cs = parse_f64_list(&args.c, "--c")?;
    let ns = parse_u32_list(&args.n, "--n")?;
    let ps = if args.p == "grid" {
        (1..=99).map(|i| i as f64 / 100.0).collect()
    } else {
        parse_f64_list(&args.p, "--p")?
    };

    let mut csv = String::from("c,N,p,bias,var_ratio\n");
    for &c in &cs {
        let cfg = TransformConfig::new(c)?;
        for &n in &ns {
            for &p in &ps {
                let bias = exact_bias(n, p, &cfg)?;
                let ratio = exact_var_ratio(n, p, &cfg)?;
                csv.push_str(&format!("{c},{n},{p},{bias:.9},{ratio:.9}\n"));
            }
        }
    }
    write_file(&args.out.out, "curves.csv", &csv)?;
    manifest::write(
        &args.out.out,
        "curves",
        &[
            ("c".into(), args.c.clone()),
            ("n".into(), args.n.clone()),
            ("p".into(), args.p.clone()),
            ("out".into(), args.out.out.display().to_string()),
        ],
    )?;
    println!("wrote {}", args.out.out.join("curves.csv").display());
    Ok(())
}

pub fn fit(args: FitArgs) -> Result<()> {
    let (path, split) = prepare_split(&args.data.data, &args.split)?;
    let cfg = TransformConfig::new(args.estimator.c)?;
    let sample = TransformedSample::from_table(&split.estimation, 0, &cfg)?;
    let kinds = parse_estimators(&args.estimator.estimators)?;
    let settings = settings_from(&args.estimator);
    let fitted = fit_all(&sample, &kinds, &settings)?;

    write_file(&args.out.out, "estimates.csv", &estimates_csv(&fitted))?;
    let mut entries = vec![
        ("data".into(), path.display().to_string()),
        ("out".into(), args.out.out.display().to_string()),
    ];
    entries.extend(split_manifest(&args.split));
    entries.extend(estimator_manifest(&args.estimator));
    manifest::write(&args.out.out, "fit", &entries)?;
    println!(
        "fit {} estimators on {} players -> {}",
        fitted.len(),
        sample.len(),
        args.out.out.join("estimates.csv").display()
    );
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<()> {
    let (path, split) = prepare_split(&args.data.data, &args.split)?;
    let cfg = TransformConfig::new(args.estimator.c)?;
    let sample = TransformedSample::from_table(&split.estimation, 0, &cfg)?;
    let kinds = parse_estimators(&args.estimator.estimators)?;
    let criteria = parse_criteria(&args.criteria)?;
    let settings = settings_from(&args.estimator);
    let fitted = fit_all(&sample, &kinds, &settings)?;

    let validation = ValidationSet::from_split(&split, &cfg)?;
    let raw_mean = split
        .estimation
        .rows
        .iter()
        .filter_map(|r| r.counts[0].rate())
        .sum::<f64>()
        / split.estimation.rows.len() as f64;
    let ctx = ScoringContext {
        validation: &validation,
        estimation_raw_mean: Some(raw_mean),
    };
    let mut provenance = split_manifest(&args.split);
    provenance.extend(estimator_manifest(&args.estimator));
    let reports = build_reports(
        &ctx,
        split.cohort.label(),
        &args.split.scheme,
        split.n_estimation(),
        &fitted,
        &criteria,
        &provenance,
    )?;

    write_file(&args.out.out, "report.csv", &reports_to_csv(&reports))?;
    let title = format!(
        "{} predictions, cohort {}",
        args.split.scheme,
        split.cohort.label()
    );
    write_file(&args.out.out, "table.txt", &render_table(&title, &reports))?;
    let mut entries = vec![
        ("data".into(), path.display().to_string()),
        ("out".into(), args.out.out.display().to_string()),
        ("criteria".into(), args.criteria.clone()),
    ];
    entries.extend(split_manifest(&args.split));
    entries.extend(estimator_manifest(&args.estimator));
    manifest::write(&args.out.out, "validate", &entries)?;
    print!("{}", render_table(&title, &reports));
    Ok(())
}

pub fn breakeven(args: BreakevenArgs) -> Result<()> {
    let path = resolve_data(&args.data.data)?;
    let records = load_records(&path)?;
    let scheme = make_scheme(&args.scheme)?;
    let table = aggregate(&records, &scheme)?;
    let rule = EligibilityRule::new(args.min_ab_train, args.min_ab_test, None)?;
    let cfg = TransformConfig::new(args.c)?;

    let mut csv = String::from(
        "cohort,sum_inv_4n1,sum_inv_4n2,expected_sspe_naive,sse_to_mean,c_factor\n",
    );
    for name in args.cohorts.split(',') {
        let cohort = parse_cohort(name.trim())?;
        let split = build_split(&table, &rule, cohort)?;
        let validation = ValidationSet::from_split(&split, &cfg)?;
        let be = validation.break_even()?;
        let c_text = be
            .c_factor
            .map(|c| format!("{c:.3}"))
            .unwrap_or_else(|| "NA".into());
        csv.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{:.3},{}\n",
            cohort.label(),
            be.sum_inv_4n1,
            be.sum_inv_4n2,
            be.expected_sspe_naive,
            be.sse_to_mean,
            c_text
        ));
    }
    write_file(&args.out.out, "breakeven.csv", &csv)?;
    manifest::write(
        &args.out.out,
        "breakeven",
        &[
            ("data".into(), path.display().to_string()),
            ("scheme".into(), args.scheme.clone()),
            ("cohorts".into(), args.cohorts.clone()),
            ("min-ab-train".into(), args.min_ab_train.to_string()),
            ("min-ab-test".into(), args.min_ab_test.to_string()),
            ("c".into(), args.c.to_string()),
            ("out".into(), args.out.out.display().to_string()),
        ],
    )?;
    print!("{csv}");
    Ok(())
}

fn normal_quantile_plot(values: &[f64]) -> String {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len() as f64;
    let mut out = String::from("theoretical_q,empirical_q\n");
    for (i, v) in sorted.iter().enumerate() {
        let u = (i as f64 + 0.5) / n;
        let q = normal_quantile(u).expect("u inside (0,1)");
        out.push_str(&format!("{q:.6},{v:.6}\n"));
    }
    out
}

fn months_gof_csv(stats: &[ChisqStat], discoveries: &std::collections::BTreeSet<PlayerId>) -> String {
    let mut out = String::from("player_id,m_i,z2,u,phi_inv_u,p_value,discovery\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{:.6},{:.9},{:.6},{:.9},{}\n",
            s.id,
            s.m,
            s.z2,
            s.u,
            s.phi_inv_u,
            s.p_one_sided(),
            discoveries.contains(&s.id) as u8
        ));
    }
    out
}

pub fn gof(args: GofArgs) -> Result<()> {
    let path = resolve_data(&args.data.data)?;
    let records = load_records(&path)?;
    let cfg = TransformConfig::new(args.c)?;
    let mut summary = String::new();

    match args.mode.as_str() {
        "halves" => {
            let table = aggregate(&records, &PeriodScheme::halves())?;
            let matrix = qualifying_matrix(&table, args.min_ab, &cfg)?;
            let zs = two_period_z(&matrix)?;
            let values: Vec<f64> = zs.iter().map(|(_, z)| *z).collect();
            let ks = ks_test(&values, KsNull::StdNormal, KsSided::Two)?;
            // Two-sided contrast p-values: the scan direction is symmetric
            // for half-season shifts.
            let pvals: Vec<(PlayerId, f64)> = zs
                .iter()
                .map(|(id, z)| (id.clone(), 2.0 * (1.0 - normal_cdf(z.abs()))))
                .collect();
            let fdr = bh_fdr(&pvals, args.q_star)?;

            let mut csv = String::from("player_id,z,p_value,discovery\n");
            for (id, z) in &zs {
                let p = 2.0 * (1.0 - normal_cdf(z.abs()));
                csv.push_str(&format!(
                    "{},{:.6},{:.9},{}\n",
                    id,
                    z,
                    p,
                    fdr.discoveries.contains(id) as u8
                ));
            }
            write_file(&args.out.out, "gof.csv", &csv)?;
            write_file(&args.out.out, "quantiles.csv", &normal_quantile_plot(&values))?;
            summary.push_str(&format!(
                "mode=halves\nrecords={}\nks_statistic={:.6}\nks_p_value={:.6}\nq_star={}\nk_star={}\ndiscoveries={}\n",
                zs.len(),
                ks.statistic,
                ks.p_value,
                args.q_star,
                fdr.k_star,
                fdr.n_discoveries()
            ));
        }
        "months" => {
            let table = aggregate(&records, &PeriodScheme::months())?;
            let matrix = qualifying_matrix(&table, args.min_ab, &cfg)?;
            let stats = multi_period_chisq(&matrix);
            let us: Vec<f64> = stats.iter().map(|s| s.u).collect();
            let pstar = familywise_pstar(&us)?;
            let pvals: Vec<(PlayerId, f64)> = stats
                .iter()
                .map(|s| (s.id.clone(), s.p_one_sided()))
                .collect();
            let fdr = bh_fdr(&pvals, args.q_star)?;

            write_file(
                &args.out.out,
                "gof.csv",
                &months_gof_csv(&stats, &fdr.discoveries),
            )?;
            let phis: Vec<f64> = stats.iter().map(|s| s.phi_inv_u).collect();
            write_file(&args.out.out, "quantiles.csv", &normal_quantile_plot(&phis))?;
            let mut names: Vec<String> = stats
                .iter()
                .filter(|s| fdr.discoveries.contains(&s.id))
                .map(|s| format!("{} ({})", s.id, s.name))
                .collect();
            names.sort();
            summary.push_str(&format!(
                "mode=months\neffective_sample={}\nfamilywise_p_star={:.6}\nq_star={}\nk_star={}\ndiscoveries={}\ndiscovered_players={}\n",
                stats.len(),
                pstar,
                args.q_star,
                fdr.k_star,
                fdr.n_discoveries(),
                names.join("; ")
            ));
        }
        other => {
            return Err(config_err(format!(
                "unknown --mode '{other}' (halves or months)"
            )))
        }
    }

    write_file(&args.out.out, "summary.txt", &summary)?;
    manifest::write(
        &args.out.out,
        "gof",
        &[
            ("data".into(), path.display().to_string()),
            ("mode".into(), args.mode.clone()),
            ("min-ab".into(), args.min_ab.to_string()),
            ("q-star".into(), args.q_star.to_string()),
            ("c".into(), args.c.to_string()),
            ("out".into(), args.out.out.display().to_string()),
        ],
    )?;
    print!("{summary}");
    Ok(())
}

pub fn scan(args: ScanArgs) -> Result<()> {
    let path = resolve_data(&args.data.data)?;
    let records = load_records(&path)?;
    let cfg = TransformConfig::new(args.c)?;
    let outcome = streakiness_scan(
        &records,
        &PeriodScheme::ten_day(),
        args.min_season_ab,
        args.min_ab,
        args.q_star,
        &cfg,
    )?;

    write_file(
        &args.out.out,
        "scan.csv",
        &months_gof_csv(&outcome.stats, &outcome.fdr.discoveries),
    )?;
    let mut series = String::from("player_id,name,segment,average\n");
    for s in &outcome.series {
        for (i, avg) in s.averages.iter().enumerate() {
            let text = avg.map(|a| format!("{a:.3}")).unwrap_or_default();
            series.push_str(&format!("{},{},{},{}\n", s.id, s.name, i + 1, text));
        }
    }
    write_file(&args.out.out, "series.csv", &series)?;
    let phis: Vec<f64> = outcome.stats.iter().map(|s| s.phi_inv_u).collect();
    write_file(&args.out.out, "quantiles.csv", &normal_quantile_plot(&phis))?;
    let summary = format!(
        "candidates={}\nqualifying={}\nq_star={}\nk_star={}\ndiscoveries={}\n",
        outcome.candidates,
        outcome.qualifying,
        args.q_star,
        outcome.fdr.k_star,
        outcome.fdr.n_discoveries()
    );
    write_file(&args.out.out, "summary.txt", &summary)?;
    manifest::write(
        &args.out.out,
        "scan",
        &[
            ("data".into(), path.display().to_string()),
            ("min-season-ab".into(), args.min_season_ab.to_string()),
            ("min-ab".into(), args.min_ab.to_string()),
            ("q-star".into(), args.q_star.to_string()),
            ("c".into(), args.c.to_string()),
            ("out".into(), args.out.out.display().to_string()),
        ],
    )?;
    print!("{summary}");
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let attempts = match &args.attempts_data {
        Some(path) => {
            if !path.is_file() {
                return Err(RunError::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("data file '{}' not found (--attempts-data)", path.display()),
                )));
            }
            let records = load_records(path)?;
            let scheme = make_scheme(&args.scheme)?;
            let table = aggregate(&records, &scheme)?;
            let rule = EligibilityRule::new(args.min_ab, args.min_ab, None)?;
            let cohort = parse_cohort(&args.cohort)?;
            let split = build_split(&table, &rule, cohort)?;
            let mut first = Vec::new();
            let mut second = Vec::new();
            for row in &split.estimation.rows {
                first.push(row.counts[0].attempts);
                let n2 = table
                    .row(&row.id)
                    .map(|r| r.counts[1].attempts)
                    .unwrap_or(0);
                second.push(n2);
            }
            AttemptSource::Fixed { first, second }
        }
        None => AttemptSource::Synthetic(SyntheticAttempts {
            players: args.players,
            log_mean: args.log_mean,
            log_sd: args.log_sd,
            min: args.min_n,
            max: args.max_n,
            dropout: args.dropout,
        }),
    };

    let theta = match args.theta_model.as_str() {
        "normal" => ThetaModel::Normal {
            mu: args.mu,
            tau2: args.tau2,
        },
        "two-group" => {
            let v = parse_f64_list(&args.mix, "--mix")?;
            if v.len() != 5 {
                return Err(config_err("--mix needs weight1,mu1,tau2_1,mu2,tau2_2"));
            }
            ThetaModel::TwoGroup {
                weight1: v[0],
                mu1: v[1],
                tau2_1: v[2],
                mu2: v[3],
                tau2_2: v[4],
            }
        }
        "n-correlated" => {
            let v = parse_f64_list(&args.theta_ab, "--theta-ab")?;
            if v.len() != 3 {
                return Err(config_err("--theta-ab needs intercept,slope,residual_sd"));
            }
            ThetaModel::AttemptCorrelated {
                intercept: v[0],
                slope: v[1],
                residual_sd: v[2],
            }
        }
        other => {
            return Err(config_err(format!(
                "unknown --theta-model '{other}' (normal, two-group, n-correlated)"
            )))
        }
    };
    let noise = match args.noise.as_str() {
        "gaussian" => NoiseModel::Gaussian,
        "binomial" => NoiseModel::Binomial,
        other => {
            return Err(config_err(format!(
                "unknown --noise '{other}' (gaussian or binomial)"
            )))
        }
    };

    let spec = SimSpec {
        attempts,
        theta,
        noise,
        replications: args.reps,
        seed: args.seed,
        eligibility_min_attempts: args.min_ab,
        transform: TransformConfig::new(args.c)?,
    };
    let kinds = parse_estimators(&args.estimators)?;
    let criteria = parse_criteria(&args.criteria)?;
    let settings = EstimatorSettings::default();

    let (first, _) = attempt_arrays(&spec)?;
    let summary = benchmark(&spec, &kinds, &criteria, &settings)?;
    write_file(&args.out.out, "summary.csv", &summary.to_csv())?;

    let mut entries = vec![
        ("players".into(), args.players.to_string()),
        ("log-mean".into(), args.log_mean.to_string()),
        ("log-sd".into(), args.log_sd.to_string()),
        ("min-n".into(), args.min_n.to_string()),
        ("max-n".into(), args.max_n.to_string()),
        ("dropout".into(), args.dropout.to_string()),
        ("theta-model".into(), args.theta_model.clone()),
        ("mu".into(), args.mu.to_string()),
        ("tau2".into(), args.tau2.to_string()),
        ("mix".into(), args.mix.clone()),
        ("theta-ab".into(), args.theta_ab.clone()),
        ("noise".into(), args.noise.clone()),
        ("reps".into(), args.reps.to_string()),
        ("seed".into(), args.seed.to_string()),
        ("min-ab".into(), args.min_ab.to_string()),
        ("estimators".into(), args.estimators.clone()),
        ("criteria".into(), args.criteria.clone()),
        ("c".into(), args.c.to_string()),
        ("out".into(), args.out.out.display().to_string()),
        ("rng".into(), "chacha12".into()),
    ];
    if let Some(p) = &args.attempts_data {
        entries.push(("attempts-data".into(), p.display().to_string()));
        entries.push(("scheme".into(), args.scheme.clone()));
        entries.push(("cohort".into(), args.cohort.clone()));
    }
    manifest::write(&args.out.out, "simulate", &entries)?;
    println!(
        "simulated {} replications over {} players (hash {})",
        summary.replications_used,
        first.len(),
        summary.config_hash
    );
    Ok(())
}
