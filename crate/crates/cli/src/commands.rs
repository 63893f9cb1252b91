//! Subcommand drivers. Each writes its artefacts into the output directory
//! and returns the file names it wrote.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spiderweb_core::error::ErrorFamily;
use spiderweb_core::escape::decode_raster;
use spiderweb_core::itinerary::{validate_itinerary_rule, RuleCheck};
use spiderweb_core::loops::{check_nesting, Disjointness, ForwardMapReport, LoopExport, NestingReport};
use spiderweb_core::mask::Mask;
use spiderweb_core::orbit::{determinable_length, OrbitReport};
use spiderweb_core::periodic::{DegreeReport, NewtonConfig, Region};
use spiderweb_core::{
    build_ladder, build_partition, check_forward_loop_map, classify_grid, complement_components, compute_itinerary,
    detect_expanding_indices, find_periodic_points, generate_itinerary, polynomial_like_degree, realize_point,
    singleton_evidence, spiders_web_verdict, validate_radius, verify_orbit_type, Complex64, CoreError, EntireFunction,
    EscapeSchedule, ExpandingSet, FundamentalLoopSet, GridSpec, Itinerary, OrbitKind, OrbitTypeParams,
    PartitionIndexer, PeriodicPointRecord, RadiusLadder, SingletonEvidence, WebVerdict, EVIDENCE_BANNER,
};

use crate::config::RunConfig;
use crate::render::{render_classification, render_holes, RenderSpec};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
    Io { path: PathBuf, source: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// 2 config, 3 ladder, 4 refinement exhausted, 5 I/O or malformed input,
    /// 6 an analysis step without an answer at this resolution.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 5,
            CliError::Core(e) => match e.family() {
                ErrorFamily::Config => 2,
                ErrorFamily::Ladder => 3,
                ErrorFamily::Refinement => 4,
                ErrorFamily::Format => 5,
                ErrorFamily::Analysis => 6,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Fields every report starts with.
#[derive(Debug, Serialize)]
struct Header {
    banner: &'static str,
    command: &'static str,
    config_hash: String,
    function: String,
    param: Option<String>,
    depth: usize,
    resolution: usize,
    config: serde_json::Value,
}

fn header(cfg: &RunConfig, command: &'static str, depth: usize, resolution: usize) -> Header {
    Header {
        banner: EVIDENCE_BANNER,
        command,
        config_hash: cfg.hash(),
        function: cfg.function.clone(),
        param: cfg.param.clone(),
        depth,
        resolution,
        config: cfg.canonical(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn out_dir(cfg: &RunConfig) -> CliResult<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    Ok(&cfg.out)
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<String> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(name.to_string())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_bytes(dir, name, text.as_bytes())
}

fn save_image(cfg: &RunConfig, dir: &Path, img: &crate::render::Image, stem: &str) -> CliResult<Vec<String>> {
    img.save(dir, stem, cfg.png).map_err(io_err(dir))
}

fn function(cfg: &RunConfig) -> CliResult<EntireFunction> {
    cfg.entire_function().map_err(CliError::Config)
}

fn ladder(cfg: &RunConfig, f: &EntireFunction) -> CliResult<RadiusLadder> {
    let cert = validate_radius(f, cfg.radius, cfg.r_max)?;
    Ok(build_ladder(f, &cert, cfg.ladder_depth)?)
}

#[derive(Debug, Serialize)]
struct LadderSummary {
    base_radius: f64,
    rungs: Vec<f64>,
    depth: usize,
    truncated_at: Option<usize>,
    fingerprint: String,
}

impl LadderSummary {
    fn new(l: &RadiusLadder) -> Self {
        Self {
            base_radius: l.base_radius,
            rungs: l.values.clone(),
            depth: l.depth,
            truncated_at: l.truncated_at,
            fingerprint: l.fingerprint(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ClassifyReport {
    #[serde(flatten)]
    header: Header,
    level: i32,
    grid: GridSpec,
    raster: String,
    ladder: LadderSummary,
    in_level: usize,
    complement: usize,
    overflow: usize,
    complement_components: usize,
    /// `evidence-positive`, `negative-at-depth`, `origin-in-level` or
    /// `origin-outside-grid`.
    web_verdict: String,
    images: Vec<String>,
}

pub fn classify(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let f = function(cfg)?;
    let ladder = ladder(cfg, &f)?;
    let spec = cfg.grid_spec(cfg.level);
    let gc = classify_grid(&f, &ladder, &spec, cfg.threads)?;
    let cm = complement_components(&gc);
    let web_verdict = match spec.cell_of(Complex64::new(0.0, 0.0)) {
        None => "origin-outside-grid".to_string(),
        Some(cell) => match spiders_web_verdict(&cm, cell) {
            Ok(WebVerdict::EvidencePositive) => "evidence-positive".into(),
            Ok(WebVerdict::NegativeAtDepth) => "negative-at-depth".into(),
            Err(CoreError::OriginNotInComplement) => "origin-in-level".into(),
            Err(e) => return Err(e.into()),
        },
    };
    let dir = out_dir(cfg)?;
    let raster = gc.to_raster();
    let mut written = vec![write_bytes(dir, "classify.swgc", &raster)?];
    let cells: Vec<u8> = gc.verdicts.iter().map(|v| v.code()).collect();
    let img = render_classification(&spec, &cells, &[], &RenderSpec::default());
    let images = save_image(cfg, dir, &img, "classify")?;
    let [in_level, complement, overflow] = gc.counts();
    let report = ClassifyReport {
        header: header(cfg, "classify", spec.depth, spec.resolution),
        level: spec.level,
        grid: spec,
        raster: written[0].clone(),
        ladder: LadderSummary::new(&ladder),
        in_level,
        complement,
        overflow,
        complement_components: cm.component_count(),
        web_verdict,
        images: images.clone(),
    };
    written.push(write_json(dir, "classify.json", &report)?);
    written.extend(images);
    Ok(written)
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

/// Loops from the configured function, or from complement masks read from
/// SWGC rasters, one per level.
fn loop_set(cfg: &RunConfig, f: &EntireFunction) -> CliResult<(FundamentalLoopSet, bool)> {
    if cfg.masks.is_empty() {
        let ladder = ladder(cfg, f)?;
        let ls = FundamentalLoopSet::extract(f, &ladder, &cfg.grid_spec(0), cfg.holes, cfg.threads)?;
        return Ok((ls, false));
    }
    let mut grid: Option<GridSpec> = None;
    let mut masks = Vec::new();
    for path in &cfg.masks {
        let (spec, cells) = decode_raster(&read_file(path)?)?;
        let spec = spec.at_level(0);
        match grid {
            None => grid = Some(spec),
            Some(g)
                if g.center != spec.center || g.half_width != spec.half_width || g.resolution != spec.resolution =>
            {
                return Err(CliError::Config(format!("{}: grid differs from the first mask", path.display())));
            }
            Some(_) => {}
        }
        masks.push(Mask::from_bits(spec.resolution, cells.iter().map(|&c| c == 1).collect()));
    }
    let grid = grid.expect("at least one mask");
    Ok((FundamentalLoopSet::from_masks(&grid, &masks)?, true))
}

#[derive(Debug, Serialize)]
struct DegreeEntry {
    m: usize,
    report: Option<DegreeReport>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct LoopsReport {
    #[serde(flatten)]
    header: Header,
    source: &'static str,
    grid: GridSpec,
    hole_areas: Vec<usize>,
    loops: Vec<LoopExport>,
    nesting: Option<NestingReport>,
    disjointness: Option<Disjointness>,
    stride: Option<usize>,
    forward_map: Vec<ForwardMapReport>,
    degrees: Vec<DegreeEntry>,
    images: Vec<String>,
}

pub fn loops(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let f = function(cfg)?;
    let (ls, from_masks) = loop_set(cfg, &f)?;
    // Nesting needs two loops; a single mask still yields its loop.
    let nesting = if ls.len() >= 2 { Some(check_nesting(&ls)?) } else { None };
    let stride = cfg.stride.or(ls.n_disjoint());
    let mut forward_map = Vec::new();
    let mut degrees = Vec::new();
    if !from_masks {
        for m in 0..ls.len().saturating_sub(1) {
            forward_map.push(check_forward_loop_map(&f, &ls, m, cfg.samples)?);
        }
        if let Some(n) = stride {
            for m in 0..ls.len().saturating_sub(n) {
                let (report, error) = match polynomial_like_degree(&f, &ls, m, n, cfg.samples) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                degrees.push(DegreeEntry { m, report, error });
            }
        }
    }
    let exports: Vec<LoopExport> = ls.loops.iter().map(|l| l.export()).collect();
    let dir = out_dir(cfg)?;
    let img = render_holes(&ls.grid, &ls.holes, &exports, &RenderSpec::default());
    let images = save_image(cfg, dir, &img, "loops")?;
    let report = LoopsReport {
        header: header(cfg, "loops", ls.grid.depth, ls.grid.resolution),
        source: if from_masks { "masks" } else { "function" },
        grid: ls.grid,
        hole_areas: ls.holes.iter().map(|h| h.area_cells).collect(),
        loops: exports,
        nesting,
        disjointness: ls.disjointness.clone(),
        stride,
        forward_map,
        degrees,
        images: images.clone(),
    };
    let mut written = vec![write_json(dir, "loops.json", &report)?];
    written.extend(images);
    Ok(written)
}

struct Pipeline {
    f: EntireFunction,
    ladder: RadiusLadder,
    partition: PartitionIndexer,
    mset: ExpandingSet,
}

fn pipeline(cfg: &RunConfig) -> CliResult<Pipeline> {
    let f = function(cfg)?;
    let ladder = ladder(cfg, &f)?;
    let ls = FundamentalLoopSet::extract(&f, &ladder, &cfg.grid_spec(0), cfg.holes, cfg.threads)?;
    let stride = match cfg.stride {
        Some(s) => s,
        None => ls.n_disjoint().ok_or(CoreError::DisjointnessNotFound { loops: ls.len() })?,
    };
    let partition = build_partition(&ls, stride)?;
    let mset = detect_expanding_indices(&f, &partition, cfg.probes);
    Ok(Pipeline { f, ladder, partition, mset })
}

#[derive(Debug, Serialize)]
struct ItineraryEntry {
    itinerary: Itinerary,
    rule: RuleCheck,
}

#[derive(Debug, Serialize)]
struct ItineraryReport {
    #[serde(flatten)]
    header: Header,
    stride: usize,
    top_index: usize,
    hole_radii: Vec<f64>,
    mset: ExpandingSet,
    rule_passes: usize,
    itineraries: Vec<ItineraryEntry>,
}

pub fn itinerary(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let pl = pipeline(cfg)?;
    let p = &pl.partition;
    let points: Vec<Complex64> = match cfg.point {
        Some([x, y]) => vec![Complex64::new(x, y)],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (lo, hi) = p.region_bbox(p.top_index);
            (0..cfg.points)
                .map(|_| Complex64::new(rng.random_range(lo.re..hi.re), rng.random_range(lo.im..hi.im)))
                .collect()
        }
    };
    let itineraries: Vec<ItineraryEntry> = points
        .into_iter()
        .map(|z| {
            let itinerary = compute_itinerary(&pl.f, p, &pl.mset, z, cfg.length);
            let rule = validate_itinerary_rule(&itinerary);
            ItineraryEntry { itinerary, rule }
        })
        .collect();
    let report = ItineraryReport {
        header: header(cfg, "itinerary", cfg.depth, cfg.grid.res),
        stride: p.stride,
        top_index: p.top_index,
        hole_radii: p.radii.clone(),
        mset: pl.mset.clone(),
        rule_passes: itineraries.iter().filter(|e| e.rule.valid).count(),
        itineraries,
    };
    let dir = out_dir(cfg)?;
    Ok(vec![write_json(dir, "itinerary.json", &report)?])
}

#[derive(Debug, Serialize)]
struct ConstructReport {
    #[serde(flatten)]
    header: Header,
    kind: OrbitKind,
    prefix: usize,
    max_subdiv: usize,
    mset: Vec<usize>,
    itinerary: Vec<usize>,
    witness: Complex64,
    recomputed: Vec<usize>,
    achieved_prefix: usize,
    self_check: bool,
    kept_counts: Vec<usize>,
    orbit: OrbitReport,
}

pub fn construct(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let pl = pipeline(cfg)?;
    let ms = &pl.mset;
    let (params, prefix) = match cfg.kind.as_str() {
        "a" => (OrbitTypeParams::kind_a_analogue(ms, cfg.prefix)?, cfg.prefix),
        "b" => (OrbitTypeParams::new(OrbitKind::BoundedSuborbitB, cfg.prefix), cfg.prefix),
        _ => {
            let schedule = EscapeSchedule::compute(&pl.partition, &pl.ladder, ms)?;
            let params =
                OrbitTypeParams { schedule: Some(schedule), ..OrbitTypeParams::new(OrbitKind::EscapingC, cfg.prefix) };
            let length = determinable_length(&params, ms, cfg.prefix);
            if length == 0 {
                return Err(CoreError::ScheduleExhausted { determinable: 0, requested: cfg.prefix }.into());
            }
            (params, length)
        }
    };
    let it = generate_itinerary(&params, ms, prefix)?;
    let chain = realize_point(&pl.f, &pl.partition, &it, prefix, cfg.max_subdiv)?;
    let orbit = verify_orbit_type(&pl.f, &pl.ladder, &pl.partition, chain.witness, &params, &it, prefix, prefix)?;
    let report = ConstructReport {
        header: header(cfg, "construct", prefix, cfg.grid.res),
        kind: params.kind,
        prefix,
        max_subdiv: cfg.max_subdiv,
        mset: ms.indices.clone(),
        itinerary: chain.requested.clone(),
        witness: chain.witness,
        recomputed: chain.recomputed.clone(),
        achieved_prefix: chain.achieved_prefix,
        self_check: chain.self_check,
        kept_counts: chain.kept_counts.clone(),
        orbit,
    };
    let dir = out_dir(cfg)?;
    Ok(vec![write_json(dir, "construct.json", &report)?])
}

#[derive(Debug, Serialize)]
struct PeriodicReport {
    #[serde(flatten)]
    header: Header,
    period: usize,
    region: Region,
    seeds: usize,
    converged: usize,
    outside_region: usize,
    non_minimal: usize,
    records: Vec<PeriodicPointRecord>,
    /// Singleton evidence per repelling record; empty for polynomials.
    evidence: Vec<SingletonEvidence>,
}

pub fn periodic(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let f = function(cfg)?;
    let region = Region::square(Complex64::new(cfg.grid.cx, cfg.grid.cy), cfg.grid.hw)?;
    let newton = NewtonConfig { seeds_per_side: cfg.seeds, ..NewtonConfig::default() };
    let search = find_periodic_points(&f, &region, cfg.period, &newton)?;
    let mut evidence = Vec::new();
    if f.is_transcendental() {
        let ladder = ladder(cfg, &f)?;
        for r in search.records.iter().filter(|r| r.repelling) {
            evidence.push(singleton_evidence(
                &f,
                &ladder,
                r.z0,
                &cfg.scales,
                cfg.evidence_res,
                cfg.evidence_depth,
                cfg.threads,
            )?);
        }
    }
    let report = PeriodicReport {
        header: header(cfg, "periodic", cfg.evidence_depth, cfg.evidence_res),
        period: search.period,
        region,
        seeds: search.seeds,
        converged: search.converged,
        outside_region: search.outside_region,
        non_minimal: search.non_minimal,
        records: search.records,
        evidence,
    };
    let dir = out_dir(cfg)?;
    Ok(vec![write_json(dir, "periodic.json", &report)?])
}

/// Loops from a `loops.json` report or a bare array of loops.
fn read_overlay(path: &Path) -> CliResult<Vec<LoopExport>> {
    let bytes = read_file(path)?;
    let bad = |e: serde_json::Error| CliError::Core(CoreError::Format(format!("{}: {e}", path.display())));
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(bad)?;
    let loops = match value {
        serde_json::Value::Object(mut obj) => obj.remove("loops").unwrap_or(serde_json::Value::Null),
        other => other,
    };
    serde_json::from_value(loops).map_err(bad)
}

#[derive(Debug, Serialize)]
struct RenderReport {
    #[serde(flatten)]
    header: Header,
    input: String,
    overlay: Option<String>,
    images: Vec<String>,
}

pub fn render(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let input = cfg.input.as_ref().ok_or_else(|| CliError::Config("render needs input = <raster.swgc>".into()))?;
    let (spec, cells) = decode_raster(&read_file(input)?)?;
    let loops = match &cfg.overlay {
        Some(path) => read_overlay(path)?,
        None => Vec::new(),
    };
    let img = render_classification(&spec, &cells, &loops, &RenderSpec::default());
    let dir = out_dir(cfg)?;
    let images = save_image(cfg, dir, &img, "render")?;
    let report = RenderReport {
        header: header(cfg, "render", spec.depth, spec.resolution),
        input: input.display().to_string(),
        overlay: cfg.overlay.as_ref().map(|p| p.display().to_string()),
        images: images.clone(),
    };
    let mut written = vec![write_json(dir, "render.json", &report)?];
    written.extend(images);
    Ok(written)
}
