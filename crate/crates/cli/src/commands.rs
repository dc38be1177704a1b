//! One function per subcommand. Each reads its input, runs the pipeline and
//! writes its reports into the output directory.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use fsforge_core::category::{
    a_infinity_witness, annotated_exceptional_angles, build_category, deform_and_recount, verify_a_infinity,
    AInfinityReport, DirectedCategoryData, ExceptionalAngle, PLLattice, Pair, WallCrossingEvent, Witness,
};
use fsforge_core::floer::{
    energy_identity_check, gmw_energy, holomorphy_diagnostic, residual, rotation_covariance_check, solve,
    truncation_study, witten_form_discrepancy, EnergyIdentityReport, FloerProblem, GmwEnergyRow, Grid,
    HolomorphyReport, M1Settings, RotationReport, TruncationRow,
};
use fsforge_core::flow::{find_connections, Connections, Flowline, ShootingConfig};
use fsforge_core::landscape::{critical_points, phase_geometry, CriticalDatum, PhaseGeometry};
use fsforge_core::transport::{absolute_grading, LiftConvention, GRADING_CONVENTION};
use fsforge_core::{Complex64, HolomorphicFunction};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{write_atomic, write_json, Envelope, VERSION};
use crate::problem::{load, FamilyFile, ProblemFile};
use crate::svg::{heat_maps, ValuePlot};
use crate::{CliError, RunConfig};

/// Multi-start seeds per generator pair in `category`.
const M1_SEEDS: usize = 8;
const M1_BUMP: f64 = 0.05;
/// Side lengths of the squares on which the GMW energy is reported.
const GMW_LAMBDAS: [f64; 3] = [2.5, 5.0, 10.0];

fn emit<T: Serialize>(config: &RunConfig, command: &str, name: &str, body: T) -> Result<(), CliError> {
    let envelope = Envelope {
        command,
        version: VERSION,
        tolerances: &config.tolerances,
        seed: config.seed,
        body,
    };
    let path = write_json(&config.out, name, &envelope)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn emit_svg(config: &RunConfig, name: &str, svg: &str) -> Result<(), CliError> {
    let path = write_atomic(&config.out, name, svg.as_bytes())?;
    info!("wrote {}", path.display());
    Ok(())
}

struct Loaded {
    problem: ProblemFile,
    function: HolomorphicFunction,
    critical: Vec<CriticalDatum>,
}

fn load_problem(config: &RunConfig, path: &Path) -> Result<Loaded, CliError> {
    let problem: ProblemFile = load(path)?;
    let function = problem.function()?;
    let critical = critical_points(&function, &config.tolerances)?;
    info!("{} critical points", critical.len());
    Ok(Loaded {
        problem,
        function,
        critical,
    })
}

impl Loaded {
    fn alpha(&self, config: &RunConfig) -> Result<f64, CliError> {
        config
            .alpha
            .or(self.problem.alpha)
            .ok_or_else(|| CliError::Parse("no alpha: pass --alpha or set it in the problem file".into()))
    }

    fn geometry(&self, config: &RunConfig) -> Result<PhaseGeometry, CliError> {
        Ok(phase_geometry(&self.critical, self.alpha(config)?, &config.tolerances)?)
    }

    fn values(&self) -> Vec<Complex64> {
        self.critical.iter().map(|d| d.value).collect()
    }

    /// Ordered pairs `x ≺ y`.
    fn directed_pairs(geometry: &PhaseGeometry) -> Vec<(usize, usize)> {
        let order = &geometry.order;
        (0..order.len())
            .flat_map(|a| order[a + 1..].iter().map(move |&j| (order[a], j)))
            .collect()
    }

    fn connections(&self, config: &RunConfig, geometry: &PhaseGeometry) -> Result<Vec<Connections>, CliError> {
        let shooting = ShootingConfig::for_critical_points(&self.critical, &config.tolerances);
        let results: Vec<_> = Self::directed_pairs(geometry)
            .par_iter()
            .map(|&(i, j)| find_connections(&self.function, &self.critical, i, j, &shooting, &config.tolerances))
            .collect();
        Ok(results.into_iter().collect::<Result<Vec<_>, _>>()?)
    }
}

#[derive(Serialize)]
struct CritBody<'a> {
    problem: &'a ProblemFile,
    critical: &'a [CriticalDatum],
}

pub fn crit(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let loaded = load_problem(config, path)?;
    emit(
        config,
        "crit",
        "crit.json",
        CritBody {
            problem: &loaded.problem,
            critical: &loaded.critical,
        },
    )
}

#[derive(Serialize)]
struct OrderBody<'a> {
    problem: &'a ProblemFile,
    geometry: &'a PhaseGeometry,
    exceptional_angles: Vec<ExceptionalAngle>,
}

pub fn order(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let loaded = load_problem(config, path)?;
    let geometry = loaded.geometry(config)?;
    let exceptional_angles = annotated_exceptional_angles(&geometry.values, &config.tolerances)?;
    emit(
        config,
        "order",
        "order.json",
        OrderBody {
            problem: &loaded.problem,
            geometry: &geometry,
            exceptional_angles,
        },
    )?;
    let plot = ValuePlot {
        values: geometry.values.clone(),
        hull: true,
        ray: Some(geometry.alpha),
        ..Default::default()
    };
    emit_svg(config, "order.svg", &plot.render())
}

#[derive(Serialize)]
struct FlowlineRecord {
    ray: usize,
    drift: f64,
    deviation: f64,
    action: f64,
    samples: Vec<[f64; 3]>,
}

impl From<&Flowline> for FlowlineRecord {
    fn from(fl: &Flowline) -> Self {
        FlowlineRecord {
            ray: fl.ray,
            drift: fl.conserved_drift,
            deviation: fl.segment_deviation,
            action: fl.action,
            samples: fl.samples.iter().map(|s| [s.t, s.z.re, s.z.im]).collect(),
        }
    }
}

#[derive(Serialize)]
struct ConnectionRecord {
    source: usize,
    target: usize,
    theta: f64,
    count_mod2: u8,
    flowlines: Vec<FlowlineRecord>,
}

#[derive(Serialize)]
struct FlowsBody<'a> {
    problem: &'a ProblemFile,
    alpha: f64,
    order: &'a [usize],
    values: Vec<Complex64>,
    connections: Vec<ConnectionRecord>,
}

pub fn flows(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let loaded = load_problem(config, path)?;
    let geometry = loaded.geometry(config)?;
    let connections = loaded.connections(config, &geometry)?;
    let values = loaded.values();
    let plot = ValuePlot {
        values: values.clone(),
        hull: true,
        segments: connections
            .iter()
            .map(|c| (values[c.source], values[c.target]))
            .collect(),
        polylines: connections
            .iter()
            .flat_map(|c| c.flowlines.iter().map(Flowline::value_image))
            .collect(),
        ray: None,
    };
    let records = connections
        .iter()
        .map(|c| ConnectionRecord {
            source: c.source,
            target: c.target,
            theta: c.theta,
            count_mod2: c.count_mod2,
            flowlines: c.flowlines.iter().map(FlowlineRecord::from).collect(),
        })
        .collect();
    emit(
        config,
        "flows",
        "flows.json",
        FlowsBody {
            problem: &loaded.problem,
            alpha: geometry.alpha,
            order: &geometry.order,
            values,
            connections: records,
        },
    )?;
    emit_svg(config, "flows.svg", &plot.render())
}

#[derive(Serialize)]
struct GradedRecord {
    ray: usize,
    grading: i64,
    action: f64,
}

#[derive(Serialize)]
struct GradingTable {
    pair: [usize; 2],
    generators: Vec<GradedRecord>,
}

#[derive(Serialize)]
struct GradeBody<'a> {
    problem: &'a ProblemFile,
    alpha: f64,
    convention: &'a str,
    lifts: LiftConvention,
    tables: Vec<GradingTable>,
}

pub fn grade(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let loaded = load_problem(config, path)?;
    let geometry = loaded.geometry(config)?;
    let lifts = LiftConvention::default();
    let mut tables = Vec::new();
    for c in loaded.connections(config, &geometry)? {
        let generators = c
            .flowlines
            .par_iter()
            .map(|fl| {
                absolute_grading(fl, &lifts).map(|g| GradedRecord {
                    ray: fl.ray,
                    grading: g.grading,
                    action: g.action,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        tables.push(GradingTable {
            pair: [c.source, c.target],
            generators,
        });
    }
    emit(
        config,
        "grade",
        "grade.json",
        GradeBody {
            problem: &loaded.problem,
            alpha: geometry.alpha,
            convention: GRADING_CONVENTION,
            lifts,
            tables,
        },
    )
}

#[derive(Serialize)]
struct StripRecord {
    pair: [usize; 2],
    ray: usize,
    grid: Grid,
    iterations: usize,
    residual_norm: f64,
    energy: f64,
    identity: EnergyIdentityReport,
    holomorphy: HolomorphyReport,
    rotation: Vec<RotationReport>,
    witten_form_discrepancy: f64,
    gmw_energy: Vec<GmwEnergyRow>,
    truncation: Vec<TruncationRow>,
    field_dump: String,
}

#[derive(Serialize)]
struct FieldDump<'a> {
    grid: &'a Grid,
    values: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct FloerBody<'a> {
    problem: &'a ProblemFile,
    alpha: f64,
    strips: Vec<StripRecord>,
}

fn solve_strip(config: &RunConfig, loaded: &Loaded, fl: &Flowline, grid: Grid) -> Result<StripRecord, CliError> {
    let problem = FloerProblem::trivial(&loaded.function, &loaded.critical, fl, grid)?;
    let field = solve(&problem)?;
    info!("strip {}->{} ray {}: {} iterations", fl.source, fl.target, fl.ray, field.iterations);
    let identity = energy_identity_check(&problem, &field)?;
    let holomorphy = holomorphy_diagnostic(&problem, &field)?;
    let rotation = [PI / 6.0, PI / 2.0]
        .iter()
        .map(|&phi| rotation_covariance_check(&problem, &field, phi))
        .collect::<Result<Vec<_>, _>>()?;
    let base = problem.with_grid(Grid::square(1.25, 16)?)?;
    let truncation = truncation_study(&base, 3)?;
    let name = format!("field_{}_{}_{}", fl.source, fl.target, fl.ray);
    let dump = FieldDump {
        grid: &grid,
        values: field.values.iter().map(|z| [z.re, z.im]).collect(),
    };
    write_json(&config.out, &format!("{name}.json"), &dump)?;
    let r: Vec<f64> = residual(&problem, &field)?.iter().map(|z| z.norm()).collect();
    let image: Vec<f64> = field.values.iter().map(|&z| problem.function.eval(z).norm()).collect();
    emit_svg(
        config,
        &format!("{name}.svg"),
        &heat_maps(grid.ns, grid.nt, &[("|residual|", &r), ("|F(u)|", &image)]),
    )?;
    Ok(StripRecord {
        pair: [fl.source, fl.target],
        ray: fl.ray,
        grid,
        iterations: field.iterations,
        residual_norm: field.residual_norm,
        energy: field.energy,
        identity,
        holomorphy,
        rotation,
        witten_form_discrepancy: witten_form_discrepancy(&problem, &field, 100, config.seed),
        gmw_energy: gmw_energy(&problem, &field, &GMW_LAMBDAS)?,
        truncation,
        field_dump: format!("{name}.json"),
    })
}

pub fn floer(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let loaded = load_problem(config, path)?;
    let geometry = loaded.geometry(config)?;
    let grid = config.floer_grid(128)?;
    let flowlines: Vec<Flowline> = loaded
        .connections(config, &geometry)?
        .into_iter()
        .flat_map(|c| c.flowlines)
        .collect();
    let strips = flowlines
        .par_iter()
        .map(|fl| solve_strip(config, &loaded, fl, grid))
        .collect::<Result<Vec<_>, _>>()?;
    emit(
        config,
        "floer",
        "floer.json",
        FloerBody {
            problem: &loaded.problem,
            alpha: geometry.alpha,
            strips,
        },
    )
}

#[derive(Serialize)]
struct AInfinityOutcome {
    pass: bool,
    report: Option<AInfinityReport>,
    witness: Option<Witness>,
}

#[derive(Serialize)]
struct CategoryBody<'a> {
    problem: &'a ProblemFile,
    alpha: f64,
    critical: &'a [CriticalDatum],
    #[serde(flatten)]
    data: &'a DirectedCategoryData,
    m1_settings: M1Settings,
    a_infinity: AInfinityOutcome,
    lattice: PLLattice,
    exceptional_angles: Vec<ExceptionalAngle>,
}

pub fn category(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let loaded = load_problem(config, path)?;
    let alpha = loaded.alpha(config)?;
    let settings = M1Settings {
        grid: config.floer_grid(64)?,
        seeds: M1_SEEDS,
        seed: config.seed,
        bump_amplitude: M1_BUMP,
    };
    let build = build_category(&loaded.function, alpha, &config.tolerances, Some(&settings))?;
    let mut data = build.data;
    data.m2 = loaded.problem.m2.clone();
    let max_n = if data.m2.is_some() { 2 } else { 1 };
    let a_infinity = match a_infinity_witness(&data, max_n)? {
        None => AInfinityOutcome {
            pass: true,
            report: Some(verify_a_infinity(&data, max_n)?),
            witness: None,
        },
        Some(w) => AInfinityOutcome {
            pass: false,
            report: None,
            witness: Some(w),
        },
    };
    let counts: BTreeMap<Pair, i64> = data
        .homs
        .iter()
        .filter(|(Pair(i, j), _)| i != j)
        .map(|(&p, gens)| (p, gens.len() as i64))
        .collect();
    let lattice = PLLattice::from_counts(&build.geometry.order, &counts)?;
    let exceptional_angles = annotated_exceptional_angles(&build.geometry.values, &config.tolerances)?;
    emit(
        config,
        "category",
        "category.json",
        CategoryBody {
            problem: &loaded.problem,
            alpha: build.geometry.alpha,
            critical: &build.critical,
            data: &data,
            m1_settings: settings,
            a_infinity,
            lattice,
            exceptional_angles,
        },
    )
}

#[derive(Serialize)]
struct WallcrossBody<'a> {
    family: &'a FamilyFile,
    range: (f64, f64),
    events: Vec<WallCrossingEvent>,
    crossings: usize,
    agree: bool,
}

pub fn wallcross(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let family: FamilyFile = load(path)?;
    let coefficient_path = family.path()?;
    let range = coefficient_path.range();
    let frames: Vec<(usize, usize)> = match family.frame {
        Some([i, k]) => vec![(i, k)],
        None => vec![(0, 1), (0, 2), (1, 2)],
    };
    let mut events = frames
        .par_iter()
        .map(|&frame| deform_and_recount(&coefficient_path, range.0, range.1, frame, &config.tolerances))
        .collect::<Result<Vec<_>, _>>()?;
    // Without a requested frame, a frame that is not crossed predicts no
    // change and would disagree with any crossing elsewhere; keep only the
    // crossed frames unless there are none.
    if family.frame.is_none() && events.iter().any(|e| e.crossed) {
        events.retain(|e| e.crossed);
    }
    let crossings = events.iter().filter(|e| e.crossed).count();
    let agree = events.iter().all(|e| e.agree);
    emit(
        config,
        "wallcross",
        "wallcross.json",
        WallcrossBody {
            family: &family,
            range,
            events,
            crossings,
            agree,
        },
    )
}
