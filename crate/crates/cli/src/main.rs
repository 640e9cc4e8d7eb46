//! Command-line front end for the magvox toolchain.
//!
//! Four subcommands cover the pipeline: `validate` checks a design,
//! `slice` plans the cure path and writes G-code, `verify` replays a
//! G-code file on the virtual printer, and `preview` predicts chain
//! bending under an applied field. Reports are written as JSON next to a
//! short human summary on standard output.
//!
//! Exit codes are a stable contract: 0 success, 1 internal failure,
//! 2 unreadable or malformed input, 3 design or configuration validation
//! failure, 4 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use magvox::actuation_preview::{build_chain, render_svg, solve_equilibrium, PreviewScenario};
use magvox::gcode;
use magvox::ingest;
use magvox::kinematics::config::MachineConfig;
use magvox::path_planner::{plan_with_mode, OrderMode, PathReport};
use magvox::virtual_printer;
use magvox::voxel_model::adjacency::{classify_adjacency, ContactClass, DEFAULT_CONTACT_TOL_MM};
use magvox::voxel_model::validation::validate_design;
use magvox::voxel_model::{merge_datasets, Design};

const EXIT_INTERNAL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_VERIFICATION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "magvox",
    version,
    about = "Turn voxel designs into stepper G-code for magnetically assisted \
             stereolithography, and check the results"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a design for structural and magnetization problems
    Validate(ValidateArgs),
    /// Plan the cure path and write G-code plus a path report
    Slice(SliceArgs),
    /// Replay a G-code file on the virtual printer and report fidelity
    Verify(VerifyArgs),
    /// Predict chain bending under an applied field; write JSON and SVG
    Preview(PreviewArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Per-voxel magnetization CSV (id,mx,my,mz)
    #[arg(long)]
    mag: PathBuf,
    /// Per-voxel geometry CSV (id,l,w,h,x,y,z)
    #[arg(long)]
    geom: PathBuf,
    /// Machine configuration TOML; built-in defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Directory for the validation report JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SliceArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output directory for the .gcode and path report
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Cure ordering within each layer
    #[arg(long, value_enum, default_value_t = OrderArg::Paper)]
    order: OrderArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderArg {
    /// Inside-out radial sweep
    Paper,
    /// Greedy nearest-neighbor walk
    Nn,
}

#[derive(Args)]
struct VerifyArgs {
    /// G-code file to replay
    gcode: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Output directory for the fidelity report JSON
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PreviewArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Scenario JSON: applied field, material, chain axis
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for the preview JSON and SVG
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Failure carrying the process exit code and a message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn classify(e: &magvox::Error) -> u8 {
    use magvox::Error::*;
    match e {
        Io(_) | Parse { .. } | EmptyInput(_) | Config(_) => EXIT_INPUT,
        DesignInvalid { .. }
        | TravelLimit { .. }
        | DuplicateId { .. }
        | MissingCounterpart { .. }
        | DegenerateMagnetization(_)
        | NotAChain(_)
        | Singularity { .. } => EXIT_VALIDATION,
        FingerprintMismatch { .. } | Execution(_) => EXIT_VERIFICATION,
        Convergence { .. } | PathDesignMismatch(_) => EXIT_INTERNAL,
    }
}

impl From<magvox::Error> for Failure {
    fn from(e: magvox::Error) -> Self {
        Failure::new(classify(&e), e.to_string())
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Failure::new(EXIT_INPUT, format!("input not found: {}", path.display()))
        } else {
            Failure::new(EXIT_INPUT, format!("cannot read {}: {e}", path.display()))
        }
    })
}

fn write_output(path: &Path, content: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| {
            Failure::new(EXIT_INPUT, format!("cannot create {}: {e}", dir.display()))
        })?;
    }
    let text = if content.ends_with('\n') {
        content.to_string()
    } else {
        format!("{content}\n")
    };
    std::fs::write(path, text)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot write {}: {e}", path.display())))
}

/// Attach the offending file to an error coming out of a parser.
fn in_file(path: &Path) -> impl Fn(magvox::Error) -> Failure + '_ {
    move |e| Failure::new(classify(&e), format!("{}: {e}", path.display()))
}

fn load_config(path: &Option<PathBuf>) -> Result<MachineConfig, Failure> {
    match path {
        None => Ok(MachineConfig::default()),
        Some(p) => {
            let text = read_input(p)?;
            MachineConfig::from_toml_str(&text).map_err(in_file(p))
        }
    }
}

/// Design name from the magnetization file: `worm.mag.csv` -> `worm`.
fn design_name(mag: &Path) -> String {
    let stem = mag.file_stem().and_then(|s| s.to_str()).unwrap_or("design");
    stem.strip_suffix(".mag").unwrap_or(stem).to_string()
}

fn load_design(input: &InputArgs, cfg: &MachineConfig) -> Result<Design, Failure> {
    let mag_text = read_input(&input.mag)?;
    let geom_text = read_input(&input.geom)?;
    let mags = ingest::parse_magnetization(&mag_text).map_err(in_file(&input.mag))?;
    let geoms = ingest::parse_geometry(&geom_text).map_err(in_file(&input.geom))?;
    let name = design_name(&input.mag);
    merge_datasets(&name, &mags, &geoms, cfg.position_convention).map_err(Failure::from)
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.input.config)?;
    let design = load_design(&args.input, &cfg)?;
    let report = validate_design(&design, Some(&cfg.travel));

    let errors = report.error_messages();
    let warnings: Vec<String> = report.warnings().map(|w| w.message.clone()).collect();

    if let Some(dir) = &args.out {
        let json = serde_json::to_string_pretty(&serde_json::json!({
            "design": design.name,
            "voxel_count": design.len(),
            "issues": report.issues,
        }))
        .expect("report serializes");
        write_output(&dir.join(format!("{}.validation.json", design.name)), &json)?;
    }

    for w in &warnings {
        println!("warning: {w}");
    }
    println!(
        "design {}: {} voxels, {} errors, {} warnings",
        design.name,
        design.len(),
        errors.len(),
        warnings.len()
    );

    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_VALIDATION,
            format!("invalid design: {}", errors.join("; ")),
        ))
    }
}

fn cmd_slice(args: SliceArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.input.config)?;
    let design = load_design(&args.input, &cfg)?;
    let mode = match args.order {
        OrderArg::Paper => OrderMode::Hypotenuse,
        OrderArg::Nn => OrderMode::NearestNeighbor,
    };
    let path = plan_with_mode(&design, &cfg, mode)?;
    let program = gcode::emit(&path, &design, &cfg)?;
    let report = PathReport::new(&path, &design);

    let gcode_path = args.out.join(format!("{}.gcode", design.name));
    let report_path = args.out.join(format!("{}.path.json", design.name));
    write_output(&gcode_path, &gcode::render(&program))?;
    write_output(&report_path, &report.to_json())?;

    println!(
        "design {}: {} voxels in {} layers, {:.6} mm xy travel",
        design.name,
        design.len(),
        path.layers.len(),
        path.total_xy_travel_mm
    );
    println!("wrote {}", gcode_path.display());
    println!("wrote {}", report_path.display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.input.config)?;
    let design = load_design(&args.input, &cfg)?;
    let text = read_input(&args.gcode)?;
    let program = gcode::parse(&text).map_err(in_file(&args.gcode))?;
    let reconstructed = virtual_printer::execute(&program, &cfg)?;
    let report = virtual_printer::compare(&design, &reconstructed, &cfg);

    let report_path = args.out.join(format!("{}.fidelity.json", design.name));
    write_output(&report_path, &report.to_json())?;

    println!(
        "design {}: {} of {} voxels reconstructed, max position error {:.3e} mm, \
         max angular error {:.3e} deg",
        design.name,
        report.reconstructed_count,
        report.design_count,
        report.max_position_error_mm,
        report.max_angular_error_deg
    );
    println!("wrote {}", report_path.display());

    if report.pass {
        println!("fidelity: pass");
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_VERIFICATION,
            "fidelity check failed; see report".to_string(),
        ))
    }
}

fn cmd_preview(args: PreviewArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.input.config)?;
    let design = load_design(&args.input, &cfg)?;
    let scenario_text = read_input(&args.scenario)?;
    let scenario: PreviewScenario = serde_json::from_str(&scenario_text).map_err(|e| {
        Failure::new(
            EXIT_INPUT,
            format!("{}: invalid scenario: {e}", args.scenario.display()),
        )
    })?;

    let validation = validate_design(&design, Some(&cfg.travel));
    if validation.has_errors() {
        return Err(Failure::new(
            EXIT_VALIDATION,
            format!("invalid design: {}", validation.error_messages().join("; ")),
        ));
    }
    let warnings: Vec<String> = validation.warnings().map(|w| w.message.clone()).collect();
    for w in &warnings {
        println!("warning: {w}");
    }

    let adjacency = classify_adjacency(&design, DEFAULT_CONTACT_TOL_MM);
    let chain = build_chain(
        &design,
        scenario.material,
        scenario.chain_axis,
        scenario.magnetization_a_per_m,
    )?;
    let result = solve_equilibrium(&chain, &scenario.field)?;

    let corner_contacts = adjacency.pairs_of_class(ContactClass::Corner).count();
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "design": design.name,
        "voxel_count": design.len(),
        "warnings": warnings,
        "adjacency": adjacency,
        "scenario": scenario,
        "equilibrium": result,
    }))
    .expect("report serializes");

    let json_path = args.out.join(format!("{}.preview.json", design.name));
    let svg_path = args.out.join(format!("{}.preview.svg", design.name));
    write_output(&json_path, &json)?;
    write_output(&svg_path, &render_svg(&chain, &result))?;

    let tip = result.tip_displacement_mm;
    println!(
        "design {}: tip deflection ({:.6}, {:.6}, {:.6}) mm after {} iterations",
        design.name, tip.x, tip.y, tip.z, result.iterations
    );
    if corner_contacts > 0 {
        println!("note: {corner_contacts} corner-only contact pairs");
    }
    println!("wrote {}", json_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Slice(args) => cmd_slice(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Preview(args) => cmd_preview(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
