use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use hgshift::clustering::{
    cluster_points, gen_crescents, ClusterConfig, CrescentLayout, KnnConfig, PointSet,
};
use hgshift::matching::{
    generate, match_correspondences, matching_rate, pairwise_baseline, run_batch,
    AssociationConfig, BatchSpec, CorrespondenceSet, MatchConfig, MatchResult, Noise, Pair,
};
use hgshift::shift::{hypergraph_shift, write_trajectory, ShiftOutcome, TrajectoryStep};
use hgshift::simplex::CertificateReport;
use hgshift::{initial_vector, Hypergraph, Termination};

use crate::cli::{ClusterArgs, GenWhat, InstanceArgs, MatchArgs, ShiftArgs};

/// A failed run: a usage problem or a runtime error.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(String),
}

impl From<hgshift::Error> for Failure {
    fn from(e: hgshift::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Run(format!("cannot read {}: {e}", path.display())))
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Outcome {
    let result = match path {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            w.write_all(bytes)?;
            w.flush()
        }),
        None => io::stdout().lock().write_all(bytes),
    };
    result.map_err(|e| {
        let target = path.map_or("stdout".to_string(), |p| p.display().to_string());
        Failure::Run(format!("cannot write {target}: {e}"))
    })
}

fn write_report<T: Serialize>(path: Option<&Path>, report: &T) -> Outcome {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Failure::Run(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn invariant(ok: bool, what: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Run(format!("invariant violated: {}", what())))
    }
}

fn noise_of(args: &InstanceArgs) -> Noise {
    match args.noise_rel {
        Some(f) => Noise::DiameterFraction(f),
        None => Noise::Absolute(args.noise),
    }
}

#[derive(Serialize)]
struct CrescentParams {
    generator: &'static str,
    n: usize,
    noise: f64,
    seed: u64,
    layout: CrescentLayout,
}

#[derive(Serialize)]
struct MatchParams<'a> {
    generator: &'static str,
    #[serde(flatten)]
    instance: &'a InstanceArgs,
    seed: u64,
}

#[derive(Serialize)]
struct InstanceFile<'a, P: Serialize> {
    generator: P,
    #[serde(flatten)]
    instance: &'a CorrespondenceSet,
}

pub fn gen(what: &GenWhat) -> Outcome {
    match what {
        GenWhat::Crescents { n, noise, seed, out } => {
            let params = CrescentParams {
                generator: "crescents",
                n: *n,
                noise: *noise,
                seed: *seed,
                layout: CrescentLayout::default(),
            };
            let ps = gen_crescents(*n, *noise, *seed).map_err(|e| Failure::Usage(e.to_string()))?;
            let echo = serde_json::to_string(&params).map_err(|e| Failure::Run(e.to_string()))?;
            let mut buf = format!("# {echo}\n").into_bytes();
            ps.write_csv(&mut buf)?;
            write_bytes(Some(out), &buf)?;
            println!("{echo}");
        }
        GenWhat::Match { instance, seed, out } => {
            let params = MatchParams {
                generator: "match",
                instance,
                seed: *seed,
            };
            let cs = generate(instance.n, noise_of(instance), instance.outliers, *seed)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            write_report(
                Some(out),
                &InstanceFile {
                    generator: &params,
                    instance: &cs,
                },
            )?;
            println!("{}", serde_json::to_string(&params).map_err(|e| Failure::Run(e.to_string()))?);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ShiftRun {
    start: usize,
    termination: Termination,
    outlier: bool,
    expansions: usize,
    replicator_iterations: usize,
    certificate: CertificateReport,
    /// Mode weights aligned with `certificate.support`.
    weights: Vec<f64>,
    trajectory: Vec<TrajectoryStep>,
}

#[derive(Serialize)]
struct ShiftReport<'a> {
    command: &'static str,
    input: String,
    config: ShiftReportConfig<'a>,
    vertex_count: usize,
    hyperedge_count: usize,
    runs: Vec<ShiftRun>,
}

#[derive(Serialize)]
struct ShiftReportConfig<'a> {
    start: Option<usize>,
    #[serde(flatten)]
    tol: &'a crate::cli::Tolerances,
    shift: hgshift::ShiftConfig,
}

fn check_trajectory(start: usize, steps: &[TrajectoryStep]) -> Outcome {
    for w in steps.windows(2) {
        invariant(w[1].density > w[0].density, || {
            format!("trajectory from hyperedge {start} is not strictly increasing at step {}", w[1].step)
        })?;
    }
    Ok(())
}

pub fn shift(args: &ShiftArgs) -> Outcome {
    args.tol.validate().map_err(Failure::Usage)?;
    let g = Hypergraph::read_json(open(&args.input)?)?;
    let m = g.build_adjacency();
    let starts: Vec<usize> = match args.start {
        Some(s) if s >= g.edge_count() => {
            return Err(Failure::Usage(format!(
                "--start {s} is out of range for {} hyperedges",
                g.edge_count()
            )))
        }
        Some(s) => vec![s],
        None => (0..g.edge_count()).collect(),
    };
    if starts.is_empty() {
        return Err(Failure::Run("hypergraph has no hyperedges".into()));
    }
    let cfg = args.tol.shift_config();
    let outcomes: Vec<(usize, ShiftOutcome)> = {
        use rayon::prelude::*;
        starts
            .par_iter()
            .map(|&s| {
                let p0 = initial_vector(&m, s)?;
                Ok((s, hypergraph_shift(&m, &p0, Some(&g), &cfg)?))
            })
            .collect::<Result<_, hgshift::Error>>()?
    };

    let mut csv = Vec::new();
    let mut runs = Vec::with_capacity(outcomes.len());
    for (start, o) in outcomes {
        check_trajectory(start, &o.trajectory)?;
        if args.trajectory.is_some() {
            let mut one = Vec::new();
            write_trajectory(&mut one, &o.trajectory)?;
            let text = String::from_utf8(one).map_err(|e| Failure::Run(e.to_string()))?;
            for (i, line) in text.lines().enumerate() {
                if i == 0 {
                    if csv.is_empty() {
                        writeln!(csv, "start,{line}").map_err(|e| Failure::Run(e.to_string()))?;
                    }
                } else {
                    writeln!(csv, "{start},{line}").map_err(|e| Failure::Run(e.to_string()))?;
                }
            }
        }
        let cert = &o.certificate;
        runs.push(ShiftRun {
            start,
            termination: o.termination,
            outlier: !(cert.lambda > 0.0),
            expansions: o.expansions,
            replicator_iterations: o.replicator_iterations,
            weights: cert.support.iter().map(|&i| cert.mode[i]).collect(),
            certificate: cert.report(),
            trajectory: o.trajectory,
        });
    }
    if let Some(path) = &args.trajectory {
        write_bytes(Some(path), &csv)?;
    }
    write_report(
        args.out.as_deref(),
        &ShiftReport {
            command: "shift",
            input: args.input.display().to_string(),
            config: ShiftReportConfig {
                start: args.start,
                tol: &args.tol,
                shift: cfg,
            },
            vertex_count: g.vertex_count(),
            hyperedge_count: g.edge_count(),
            runs,
        },
    )
}

#[derive(Serialize)]
struct ClusterMode {
    id: usize,
    lambda: f64,
    representative_seed: usize,
    support_size: usize,
    seeds: usize,
    basins: usize,
    points: usize,
}

#[derive(Serialize)]
struct ClusterReport<'a> {
    command: &'static str,
    input: String,
    config: ClusterReportConfig<'a>,
    points: usize,
    vertices: usize,
    hyperedges: usize,
    effective_sigma: f64,
    clusters: usize,
    outliers: usize,
    merged_modes: usize,
    uncertified_runs: usize,
    total_expansions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmi: Option<f64>,
    modes: Vec<ClusterMode>,
}

#[derive(Serialize)]
struct ClusterReportConfig<'a> {
    k: usize,
    sigma: Option<f64>,
    merge_tol: f64,
    persistence: Option<f64>,
    #[serde(flatten)]
    tol: &'a crate::cli::Tolerances,
    shift: hgshift::ShiftConfig,
}

pub fn cluster(args: &ClusterArgs) -> Outcome {
    args.tol.validate().map_err(Failure::Usage)?;
    if !(args.merge_tol > 0.0 && args.merge_tol.is_finite()) {
        return Err(Failure::Usage(format!("--merge-tol must be positive, got {}", args.merge_tol)));
    }
    let persistence = (!args.no_persistence).then_some(args.persistence);
    if let Some(p) = persistence {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Failure::Usage(format!("--persistence must lie in (0, 1], got {p}")));
        }
    }
    let ps = PointSet::read_csv(open(&args.input)?)?;
    let knn = KnnConfig {
        k: args.k,
        sigma: args.sigma.0,
    };
    let cfg = ClusterConfig {
        shift: args.tol.shift_config(),
        merge_tol: args.merge_tol,
        persistence,
    };
    let pc = cluster_points(&ps, &knn, &cfg)?;
    let r = &pc.result;
    let count = r.cluster_count();
    invariant(
        pc.assignments.iter().all(|a| a.is_none_or(|c| c < count)),
        || "assignment refers to a missing cluster".into(),
    )?;
    invariant(r.modes.iter().all(|m| m.lambda > 0.0), || "cluster with λ = 0".into())?;

    let mut csv = Vec::new();
    pc.write_assignments(&ps, &mut csv)?;
    write_bytes(Some(&args.out), &csv)?;

    let modes = r
        .clusters
        .iter()
        .map(|c| ClusterMode {
            id: c.id,
            lambda: c.lambda,
            representative_seed: c.representative_seed,
            support_size: c.support.len(),
            seeds: c.seeds,
            basins: c.basins,
            points: pc.assignments.iter().filter(|&&a| a == Some(c.id)).count(),
        })
        .collect();
    write_report(
        args.summary.as_deref(),
        &ClusterReport {
            command: "cluster",
            input: args.input.display().to_string(),
            config: ClusterReportConfig {
                k: args.k,
                sigma: args.sigma.0,
                merge_tol: args.merge_tol,
                persistence,
                tol: &args.tol,
                shift: cfg.shift,
            },
            points: ps.len(),
            vertices: pc.knn.vertices.len(),
            hyperedges: pc.knn.hypergraph.edge_count(),
            effective_sigma: pc.knn.sigma,
            clusters: count,
            outliers: pc.assignments.iter().filter(|a| a.is_none()).count(),
            merged_modes: r.merged_mode_count,
            uncertified_runs: r.uncertified_runs,
            total_expansions: r.total_expansions,
            nmi: pc.nmi(&ps),
            modes,
        },
    )
}

#[derive(Serialize)]
struct MethodReport {
    selected: Vec<Pair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    hyperedges: usize,
    seed_hyperedge: usize,
    termination: Termination,
    certificate: CertificateReport,
}

impl MethodReport {
    fn new(r: MatchResult, truth: Option<&[Pair]>) -> Outcome<Self> {
        let rate = match truth {
            Some(t) => Some(matching_rate(&r.selected, t)?),
            None => None,
        };
        Ok(Self {
            rate,
            hyperedges: r.hyperedge_count,
            seed_hyperedge: r.seed_hyperedge,
            termination: r.termination,
            certificate: r.certificate.report(),
            selected: r.selected,
        })
    }
}

#[derive(Serialize)]
struct MatchReportConfig<'a> {
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<MatchParams<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    batch: Option<usize>,
    baseline: bool,
    #[serde(flatten)]
    tol: &'a crate::cli::Tolerances,
    matching: MatchConfig,
}

#[derive(Serialize)]
struct MatchReport<'a> {
    command: &'static str,
    config: MatchReportConfig<'a>,
    candidates: usize,
    triplet: MethodReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairwise: Option<MethodReport>,
}

#[derive(Serialize)]
struct BatchFile<'a> {
    command: &'static str,
    config: MatchReportConfig<'a>,
    #[serde(flatten)]
    report: hgshift::matching::BatchReport,
}

fn one_to_one(selected: &[Pair]) -> bool {
    let mut sources: Vec<usize> = selected.iter().map(|p| p.0).collect();
    let mut targets: Vec<usize> = selected.iter().map(|p| p.1).collect();
    sources.sort_unstable();
    targets.sort_unstable();
    sources.windows(2).all(|w| w[0] != w[1]) && targets.windows(2).all(|w| w[0] != w[1])
}

pub fn match_cmd(args: &MatchArgs) -> Outcome {
    args.tol.validate().map_err(Failure::Usage)?;
    let cfg = MatchConfig {
        association: AssociationConfig {
            sigma_g: args.sigma.0,
            seed: args.seed,
            ..AssociationConfig::default()
        },
        shift: args.tol.shift_config(),
        ..MatchConfig::default()
    };
    let generator = args.input.is_none().then_some(MatchParams {
        generator: "match",
        instance: &args.instance,
        seed: args.seed,
    });
    let config = MatchReportConfig {
        input: args.input.as_ref().map(|p| p.display().to_string()),
        generator,
        batch: args.batch,
        baseline: args.baseline,
        tol: &args.tol,
        matching: cfg,
    };

    if let Some(reps) = args.batch {
        if reps == 0 {
            return Err(Failure::Usage("--batch must be positive".into()));
        }
        let spec = BatchSpec {
            n: args.instance.n,
            noise: noise_of(&args.instance),
            n_outliers: args.instance.outliers,
            first_seed: args.seed,
            repetitions: reps,
            baseline: args.baseline,
        };
        let report = run_batch(&spec, &cfg).map_err(|e| match e {
            hgshift::Error::InvalidParameter(m) => Failure::Usage(m),
            other => other.into(),
        })?;
        return write_report(
            args.out.as_deref(),
            &BatchFile {
                command: "match",
                config,
                report,
            },
        );
    }

    let cs = match &args.input {
        Some(path) => CorrespondenceSet::read_json(open(path)?)?,
        None => generate(args.instance.n, noise_of(&args.instance), args.instance.outliers, args.seed)
            .map_err(|e| Failure::Usage(e.to_string()))?,
    };
    let truth = cs.truth.as_deref().filter(|t| !t.is_empty());
    let triplet = match_correspondences(&cs, &cfg)?;
    invariant(one_to_one(&triplet.selected), || "triplet selection reuses a point".into())?;
    let pairwise = if args.baseline {
        let b = pairwise_baseline(&cs, &cfg)?;
        invariant(one_to_one(&b.selected), || "pairwise selection reuses a point".into())?;
        Some(MethodReport::new(b, truth)?)
    } else {
        None
    };
    write_report(
        args.out.as_deref(),
        &MatchReport {
            command: "match",
            config,
            candidates: cs.candidates.len(),
            triplet: MethodReport::new(triplet, truth)?,
            pairwise,
        },
    )
}
