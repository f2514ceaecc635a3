use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use qfp_herald::circuit::compose_unitary;
use qfp_herald::hafnian::precompute_tables;
use qfp_herald::herald::{
    convergence_check, herald_from_unitary, probability_at_cutoff, quadrature_wavefunction,
    DEFAULT_P_FLOOR,
};
use qfp_herald::optimizer::{decode_params, encode_params, herald_design, pso_run};
use qfp_herald::oracle::oracle_herald;
use qfp_herald::{
    DetectionScheme, EomSetting, FrequencyLattice, PsoConfig, QfpCircuit, ShaperSetting,
    SqueezingVector, TargetState, C64,
};

use crate::error::{CliError, CliResult};
use crate::schema::*;

/// Offset between the evaluation cutoff and the convergence probe.
pub const PROBE_OFFSET: usize = 10;
pub const ORACLE_TOLERANCE: f64 = 1e-6;
pub const ORACLE_CUTOFF: usize = 8;
pub const ORACLE_N_C: usize = 6;

/// `--seed`, else the config seed, else fresh OS entropy.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>) -> u64 {
    cli.or(config).unwrap_or_else(rand::random)
}

/// Which archived design of a `design_result` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    Cost,
    Fidelity,
}

fn value_kind(path: &Path) -> CliResult<String> {
    let v: Value = read_json(path)?;
    v.get("kind")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CliError::Config(format!("{}: missing \"kind\"", path.display())))
}

pub fn design(config: &RunConfig, seed: Option<u64>, n_c: Option<usize>) -> CliResult<DesignFile> {
    check_version(&config.schema_version)?;
    let space = config.space.build(n_c)?;
    let section = config.pso.clone().unwrap_or(PsoSection {
        swarm_size: None,
        iterations: None,
        inertia: None,
        cognitive: None,
        social: None,
        seed: None,
        initial_positions: Vec::new(),
    });
    let seed = resolve_seed(seed, section.seed);
    let pso = section.build(seed);
    pso.validate(&space)?;
    let target = config.target.build(space.n_c)?;
    let tables = space.tables()?;
    let result = pso_run(&space, &target, &tables, &pso)?;

    if result.best_by_cost.state.is_none() {
        return Err(CliError::HeraldImpossible(
            "no visited design heralded the requested pattern".into(),
        ));
    }
    if !result.trace.windows(2).all(|w| w[1] <= w[0]) {
        return Err(CliError::Invariant("best-cost trace increased".into()));
    }
    let entry = |record: &qfp_herald::optimizer::DesignRecord| -> CliResult<DesignEntry> {
        let (design, _) = decode_params(&record.params, &space)?;
        Ok(DesignEntry::new(record, design))
    };
    let best_by_cost = entry(&result.best_by_cost)?;
    let best_by_fidelity = result.best_by_fidelity.as_ref().map(entry).transpose()?;
    if let Some(f) = best_by_fidelity
        .as_ref()
        .and_then(|e| e.state.as_ref()?.fidelity)
    {
        if f <= qfp_herald::optimizer::FIDELITY_ARCHIVE {
            return Err(CliError::Invariant(format!(
                "fidelity archive holds F = {f}"
            )));
        }
    }
    Ok(DesignFile {
        schema_version: SCHEMA_VERSION.into(),
        kind: KIND_DESIGN_RESULT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        space,
        target: target_record(&config.target, &target),
        pso: PsoConfig {
            initial_positions: Vec::new(),
            ..pso
        },
        tables: tables_stats(&tables),
        best_by_cost,
        best_by_fidelity,
        trace: result.trace,
        evaluations: result.evaluations,
    })
}

struct Loaded {
    space: qfp_herald::DesignSpace,
    target: TargetSpec,
    design: qfp_herald::Design,
}

fn load_design(path: &Path, pick: Pick, n_c: Option<usize>) -> CliResult<Loaded> {
    match value_kind(path)?.as_str() {
        KIND_DESIGN_RESULT => {
            let file: DesignFile = read_json(path)?;
            let entry = match pick {
                Pick::Cost => file.best_by_cost,
                Pick::Fidelity => file.best_by_fidelity.ok_or_else(|| {
                    CliError::Config(format!("{}: no design with F > 0.9", path.display()))
                })?,
            };
            let mut space = file.space;
            if let Some(n) = n_c {
                space.n_c = n;
            }
            space.validate()?;
            let (design, _) = decode_params(&entry.params, &space)?;
            Ok(Loaded {
                space,
                target: file.target.spec,
                design,
            })
        }
        KIND_DESIGN => {
            let input: DesignInput = read_json(path)?;
            let space = input.space.build(n_c)?;
            let design = match (input.design, input.params) {
                (Some(design), None) => {
                    let params = encode_params(&design, &space)?;
                    decode_params(&params, &space)?;
                    design
                }
                (None, Some(params)) => decode_params(&params, &space)?.0,
                _ => {
                    return Err(CliError::Config(format!(
                        "{}: give exactly one of \"design\" and \"params\"",
                        path.display()
                    )))
                }
            };
            Ok(Loaded {
                space,
                target: input.target,
                design,
            })
        }
        other => Err(CliError::Config(format!(
            "{}: cannot evaluate a file of kind {other:?}",
            path.display()
        ))),
    }
}

pub fn evaluate(
    path: &Path,
    pick: Pick,
    n_c: Option<usize>,
    probe_n_c: Option<usize>,
    seed: Option<u64>,
) -> CliResult<EvaluationFile> {
    let loaded = load_design(path, pick, n_c)?;
    let space = &loaded.space;
    let target = loaded.target.build(space.n_c)?;
    let tables = space.tables()?;
    let (state, sigma_center) = herald_design(&loaded.design, space, &tables)?;
    let state = state.scored(&target)?;
    let probe = probe_n_c.unwrap_or(space.n_c + PROBE_OFFSET);
    let r = loaded.design.squeezing_vector(space.r_max)?;
    let converged = convergence_check(&state, &sigma_center, &r, probe)?;
    let probe_probability = probability_at_cutoff(&sigma_center, &r, &state.scheme, probe)?;
    let record = StateRecord::from(&state);
    if (state.norm_sq() - 1.0).abs() > 1e-9 {
        return Err(CliError::Invariant(format!(
            "state norm {}",
            state.norm_sq()
        )));
    }
    Ok(EvaluationFile {
        schema_version: SCHEMA_VERSION.into(),
        kind: KIND_EVALUATION.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: resolve_seed(seed, None),
        space: space.clone(),
        target: target_record(&loaded.target, &target),
        params: encode_params(&loaded.design, space)?,
        design: loaded.design,
        probability: record.probability,
        fidelity: record.fidelity.unwrap_or(0.0),
        cost: record.cost.unwrap_or(0.0),
        coefficients: record.coefficients,
        converged,
        probe_n_c: probe,
        probe_probability,
    })
}

/// Coefficients and, when known, the target of any state-bearing file.
pub fn load_state(path: &Path, pick: Pick) -> CliResult<(Vec<C64>, Option<TargetState>)> {
    let (coefficients, spec) = match value_kind(path)?.as_str() {
        KIND_DESIGN_RESULT => {
            let file: DesignFile = read_json(path)?;
            let entry = match pick {
                Pick::Cost => Some(file.best_by_cost),
                Pick::Fidelity => file.best_by_fidelity,
            };
            let state = entry.and_then(|e| e.state).ok_or_else(|| {
                CliError::HeraldImpossible(format!(
                    "{}: no heralded state recorded",
                    path.display()
                ))
            })?;
            (state.coefficients, Some(file.target.spec))
        }
        KIND_EVALUATION => {
            let file: EvaluationFile = read_json(path)?;
            (file.coefficients, Some(file.target.spec))
        }
        KIND_STATE => {
            let file: StateFile = read_json(path)?;
            (file.coefficients, file.target)
        }
        other => {
            return Err(CliError::Config(format!(
                "{}: no state in a file of kind {other:?}",
                path.display()
            )))
        }
    };
    if coefficients.is_empty() {
        return Err(CliError::Config(format!(
            "{}: empty coefficient list",
            path.display()
        )));
    }
    let c = from_complex(&coefficients);
    let target = spec.map(|s| s.build(c.len() - 1)).transpose()?;
    Ok((c, target))
}

/// `points` samples from `q_min` to `q_max`, mirror-symmetric when the range is.
pub fn q_grid(q_min: f64, q_max: f64, points: usize) -> CliResult<Vec<f64>> {
    if points == 0 {
        return Err(CliError::Config("points must be positive".into()));
    }
    if !(q_min.is_finite() && q_max.is_finite() && q_min < q_max) {
        return Err(CliError::Config(format!("bad q range [{q_min}, {q_max}]")));
    }
    if points == 1 {
        return Ok(vec![q_min]);
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| (q_min * (last - i as f64) + q_max * i as f64) / last)
        .collect())
}

pub fn wavefunction_csv(c: &[C64], grid: &[f64]) -> String {
    let mut out = String::from("q,re_psi,im_psi,abs_psi_sq\n");
    for (q, psi) in grid.iter().zip(quadrature_wavefunction(c, grid)) {
        let _ = writeln!(out, "{q},{},{},{}", psi.re, psi.im, psi.norm_sqr());
    }
    out
}

pub fn fock_csv(c: &[C64]) -> String {
    let mut out = String::from("n,probability\n");
    for (n, z) in c.iter().enumerate() {
        let _ = writeln!(out, "{n},{}", z.norm_sqr());
    }
    out
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, &e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, &e))
}

pub fn wavefunction(
    path: &Path,
    pick: Pick,
    q_min: f64,
    q_max: f64,
    points: usize,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    let grid = q_grid(q_min, q_max, points)?;
    let (c, target) = load_state(path, pick)?;
    let mut files = vec![
        (
            out_dir.join("wavefunction.csv"),
            wavefunction_csv(&c, &grid),
        ),
        (out_dir.join("fock.csv"), fock_csv(&c)),
    ];
    if let Some(t) = target {
        files.push((
            out_dir.join("target_wavefunction.csv"),
            wavefunction_csv(&t.coefficients, &grid),
        ));
        files.push((out_dir.join("target_fock.csv"), fock_csv(&t.coefficients)));
    }
    for (p, contents) in &files {
        write_file(p, contents)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Random full-band three-mode circuit: two EOMs around one shaper.
fn random_circuit(rng: &mut ChaCha8Rng) -> CliResult<qfp_herald::UnitaryMatrix> {
    let lattice = FrequencyLattice::new(3, 3)?;
    let tau = std::f64::consts::TAU;
    let eoms = (0..2)
        .map(|_| EomSetting::new(rng.random_range(0.0..2.5), rng.random_range(0.0..tau)))
        .collect::<qfp_herald::Result<Vec<_>>>()?;
    let phases = (0..3).map(|_| rng.random_range(0.0..tau)).collect();
    let circuit = QfpCircuit::new(lattice, eoms, vec![ShaperSetting::new(phases)?])?;
    Ok(compose_unitary(&circuit)?)
}

fn cannot_herald(e: &qfp_herald::Error) -> bool {
    matches!(e, qfp_herald::Error::HeraldImpossible { .. })
}

pub fn oracle_check(trials: usize, seed: Option<u64>) -> CliResult<OracleReport> {
    let seed = resolve_seed(seed, None);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scheme = DetectionScheme::new(1, 3, 1)?;
    let tables = precompute_tables(1, 3, ORACLE_N_C)?;
    let (mut d_pop, mut d_p, mut d_amp) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut disagreements = 0;
    for _ in 0..trials {
        let u = random_circuit(&mut rng)?;
        let r: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..=0.5)).collect();
        let sq = SqueezingVector::new(r.clone(), 1.5)?;
        let gaussian = herald_from_unitary(&u, &sq, &scheme, &tables, 1e-10, DEFAULT_P_FLOOR);
        let fock = oracle_herald(
            &u.entries,
            &r,
            &[1, 0, 1],
            1,
            ORACLE_CUTOFF,
            ORACLE_N_C,
            DEFAULT_P_FLOOR,
        );
        match (gaussian, fock) {
            (Ok((state, _)), Ok((coeffs, p))) => {
                d_p = d_p.max((state.probability - p).abs());
                for (a, b) in state.coefficients.iter().zip(&coeffs) {
                    d_pop = d_pop.max((a.norm_sqr() - b.norm_sqr()).abs());
                    d_amp = d_amp.max((a - b).norm());
                }
            }
            (Err(a), Err(b)) if cannot_herald(&a) && cannot_herald(&b) => {}
            (Ok(_), Err(e)) | (Err(e), Ok(_)) if cannot_herald(&e) => disagreements += 1,
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        }
    }
    let pass = disagreements == 0 && d_pop <= ORACLE_TOLERANCE && d_p <= ORACLE_TOLERANCE;
    Ok(OracleReport {
        schema_version: SCHEMA_VERSION.into(),
        kind: KIND_ORACLE_REPORT.into(),
        seed,
        trials,
        n_modes: 3,
        cutoff: ORACLE_CUTOFF,
        n_c: ORACLE_N_C,
        max_delta_population: d_pop,
        max_delta_probability: d_p,
        max_delta_amplitude: d_amp,
        disagreements,
        tolerance: ORACLE_TOLERANCE,
        pass,
    })
}

pub fn tables(n_s: usize, n_squeezed: usize, n_c: usize) -> CliResult<TableStats> {
    Ok(tables_stats(&precompute_tables(n_s, n_squeezed, n_c)?))
}

fn sibling_csv(path: &Path, name: &str) -> Option<String> {
    let candidate = path.with_extension("").join(name);
    candidate.is_file().then(|| candidate.display().to_string())
}

fn bundle_record(
    path: &Path,
    selection: &str,
    space: &qfp_herald::DesignSpace,
    alpha: f64,
    state: &StateRecord,
) -> BundleRecord {
    BundleRecord {
        source: path.display().to_string(),
        selection: selection.into(),
        alpha: Some(alpha),
        components: Some(space.components),
        n_squeezed: Some(space.n_squeezed),
        n_modes: Some(space.n_modes),
        n_c: Some(space.n_c),
        fidelity: state.fidelity,
        probability: state.probability,
        cost: state.cost,
        coefficients: state.coefficients.clone(),
        wavefunction_csv: sibling_csv(path, "wavefunction.csv"),
        fock_csv: sibling_csv(path, "fock.csv"),
    }
}

/// Collect every result in `dir` (sorted by file name) into one bundle.
pub fn report(dir: &Path) -> CliResult<(Bundle, Vec<String>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, &e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        let kind = match value_kind(&path) {
            Ok(kind) => kind,
            Err(CliError::Config(msg)) if !msg.contains("newer than supported") => {
                skipped.push(msg);
                continue;
            }
            Err(e) => return Err(e),
        };
        match kind.as_str() {
            KIND_DESIGN_RESULT => {
                let file: DesignFile = read_json(&path)?;
                let alpha = file.target.spec.alpha();
                for (selection, entry) in [
                    ("cost", Some(&file.best_by_cost)),
                    ("fidelity", file.best_by_fidelity.as_ref()),
                ] {
                    if let Some(state) = entry.and_then(|e| e.state.as_ref()) {
                        records.push(bundle_record(&path, selection, &file.space, alpha, state));
                    }
                }
            }
            KIND_EVALUATION => {
                let file: EvaluationFile = read_json(&path)?;
                let state = StateRecord {
                    probability: file.probability,
                    fidelity: Some(file.fidelity),
                    cost: Some(file.cost),
                    coefficients: file.coefficients.clone(),
                };
                records.push(bundle_record(
                    &path,
                    "evaluation",
                    &file.space,
                    file.target.spec.alpha(),
                    &state,
                ));
            }
            other => skipped.push(format!(
                "{}: kind {other:?} is not a result",
                path.display()
            )),
        }
    }
    Ok((
        Bundle {
            schema_version: SCHEMA_VERSION.into(),
            kind: KIND_BUNDLE.into(),
            records,
        },
        skipped,
    ))
}
