//! The `handvox` command line: synth, voxelize, heatmap, augment, register
//! and eval subcommands over the on-disk formats of [`crate::io`].
//!
//! Exit codes: 0 success, 1 invalid arguments or data, 2 I/O failure.
//! Every subcommand reads and checks all of its inputs before it writes
//! anything, and equal arguments always produce byte-identical files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::augment::{
    sample_params, transform_grid, transform_heatmaps_with, transform_joints, AugmentParams,
};
use crate::error::{Error, Result};
use crate::heatmap::{decode_heatmaps, default_sigma, make_heatmaps, JointSet};
use crate::io;
use crate::metrics::{joint_error, shape_error, vertex_error};
use crate::register::{register_with_report, FieldRegistration, NrgaConfig, RegisterMethod};
use crate::synthhand::{self, perturb_surface, render_depth, sample_pose, HandModel, PosedHand};
use crate::voxgrid::{
    crop_points, depth_to_points, voxelize_mesh, voxelize_points, CameraIntrinsics, CubeFrame, DepthMap,
    DEFAULT_CUBE_SIDE, HEATMAP_GRID_DIM, INPUT_GRID_DIM, SHAPE_GRID_DIM,
};
use crate::Vec3;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// Largest accepted `synth --count`.
pub const MAX_SYNTH_COUNT: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "handvox", version, about = "Voxel-based hand shape and pose toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic hands: mesh, joints, depth map and voxel grids.
    Synth(SynthArgs),
    /// Voxelize a depth map (PGM) or a mesh (OBJ) into a palm-centred cube.
    Voxelize(VoxelizeArgs),
    /// Encode joints as 3D Gaussian heatmaps, or decode a stack back to joints.
    Heatmap(HeatmapArgs),
    /// Rotate, scale and translate a grid and its joints or heatmaps.
    Augment(AugmentArgs),
    /// Fit a mesh onto the occupied voxels of a grid.
    Register(RegisterArgs),
    /// Compare predictions with ground truth and print a JSON metrics report.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CubeArgs {
    /// Edge length of the palm-centred cube in mm.
    #[arg(long, default_value_t = DEFAULT_CUBE_SIDE)]
    pub cube_size: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CameraArgs {
    #[arg(long, default_value_t = 475.0)]
    pub fx: f64,
    #[arg(long, default_value_t = 475.0)]
    pub fy: f64,
    #[arg(long, default_value_t = 320.0)]
    pub cx: f64,
    #[arg(long, default_value_t = 240.0)]
    pub cy: f64,
}

impl CameraArgs {
    fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Sample `i` uses pose seed `seed + i`; seed 0 is the rest pose.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cube: CubeArgs,
    /// Resolution of the voxelized depth map.
    #[arg(long, default_value_t = INPUT_GRID_DIM)]
    pub grid_dim: usize,
    /// Resolution of the voxelized shape.
    #[arg(long, default_value_t = SHAPE_GRID_DIM)]
    pub shape_dim: usize,
    #[arg(long, default_value_t = 640)]
    pub width: usize,
    #[arg(long, default_value_t = 480)]
    pub height: usize,
    /// Mean normal offset (mm) of the coarse surface written next to the
    /// ground truth; 0 disables it.
    #[arg(long, default_value_t = 8.0)]
    pub perturb: f64,
    #[command(flatten)]
    pub camera: CameraArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    /// Depth map to back-project (16-bit PGM, mm).
    #[arg(long, conflicts_with = "mesh", required_unless_present = "mesh")]
    pub depth: Option<PathBuf>,
    /// Mesh to voxelize as a surface shell.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Joints whose palm centre places the cube.
    #[arg(long)]
    pub joints: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cube: CubeArgs,
    /// Resolution for depth input.
    #[arg(long, default_value_t = INPUT_GRID_DIM)]
    pub grid_dim: usize,
    /// Resolution for mesh input.
    #[arg(long, default_value_t = SHAPE_GRID_DIM)]
    pub shape_dim: usize,
    #[command(flatten)]
    pub camera: CameraArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Joints to encode.
    #[arg(long, conflicts_with = "decode", required_unless_present = "decode")]
    pub joints: Option<PathBuf>,
    /// Heatmap stack to decode into joints.
    #[arg(long)]
    pub decode: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cube: CubeArgs,
    #[arg(long, default_value_t = HEATMAP_GRID_DIM)]
    pub heatmap_dim: usize,
    /// Gaussian width in mm; defaults to 1.7 voxels.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Cube centre as `x,y,z`; defaults to the palm centre of the joints.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub center: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, requires = "joints_out")]
    pub joints: Option<PathBuf>,
    #[arg(long, requires = "joints")]
    pub joints_out: Option<PathBuf>,
    #[arg(long, requires = "heatmaps_out")]
    pub heatmaps: Option<PathBuf>,
    #[arg(long, requires = "heatmaps")]
    pub heatmaps_out: Option<PathBuf>,
    /// Draw random parameters from this seed.
    #[arg(long, conflicts_with_all = ["rotate", "scale", "translate"])]
    pub seed: Option<u64>,
    /// Euler angles `x,y,z` in degrees.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub rotate: Option<[f64; 3]>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Translation `x,y,z` in voxels of `--grid`.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub translate: Option<[f64; 3]>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dispfield,
    Nrga,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Occupancy grid covering the registration cube.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Dispfield)]
    pub method: MethodArg,
    /// Smoothing passes (dispfield, default 5) or iteration budget (nrga, default 30).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Smoothing weight for dispfield.
    #[arg(long, default_value_t = crate::register::DEFAULT_SMOOTH_LAMBDA)]
    pub lambda: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, requires = "gt_mesh")]
    pub pred_mesh: Option<PathBuf>,
    #[arg(long, requires = "pred_mesh")]
    pub gt_mesh: Option<PathBuf>,
    #[arg(long, requires = "gt_joints")]
    pub pred_joints: Option<PathBuf>,
    #[arg(long, requires = "pred_joints")]
    pub gt_joints: Option<PathBuf>,
    #[arg(long, requires = "gt_grid")]
    pub pred_grid: Option<PathBuf>,
    #[arg(long, requires = "pred_grid")]
    pub gt_grid: Option<PathBuf>,
    /// Write the metrics here instead of standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse::<f64>().map_err(|_| format!("{p:?} is not a number"))?;
        if !o.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(out)
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("handvox: {e}");
            match e {
                Error::Io(_) => EXIT_IO,
                _ => EXIT_INVALID,
            }
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Voxelize(a) => voxelize(a),
        Command::Heatmap(a) => heatmap(a),
        Command::Augment(a) => augment(a),
        Command::Register(a) => register(a),
        Command::Eval(a) => eval(a),
    }
}

fn check_dim(name: &str, dim: usize) -> Result<()> {
    if dim == 0 || dim > io::MAX_DIM as usize {
        return Err(Error::invalid(format!("--{name} must lie in 1..={}", io::MAX_DIM)));
    }
    Ok(())
}

fn frame_at(center: Vec3, cube: &CubeArgs) -> Result<CubeFrame> {
    CubeFrame::new(center, cube.cube_size)
}

/// Palm centre for 21/22-joint sets; other sizes need an explicit centre.
fn cube_center(joints: &JointSet) -> Result<Vec3> {
    match joints.len() {
        n if n == synthhand::JOINT_COUNT || n == synthhand::JOINT_COUNT + 1 => Ok(synthhand::palm_center(joints)),
        n => Err(Error::invalid(format!(
            "cannot place the cube from {n} joints; expected 21 or 22, or pass --center"
        ))),
    }
}

/// Files to write once every input has been validated.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    fn add_report(&mut self, path: &Option<PathBuf>, value: &impl Serialize) {
        if let Some(p) = path {
            self.add(p.clone(), to_json(value));
        }
    }

    fn write(self) -> Result<()> {
        for (path, bytes) in self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, bytes)?;
        }
        Ok(())
    }
}

fn to_json(value: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

/// Fixed placement of the hand in front of the camera: fingers up in the
/// image, palm facing the camera, about 450 mm away.
pub fn place_in_view(hand: &PosedHand) -> PosedHand {
    let r = crate::augment::rot_z(180.0);
    let t = Vec3::new(0.0, 60.0, 450.0);
    let mesh = hand
        .mesh
        .with_vertices(hand.mesh.vertices().iter().map(|v| r * v + t).collect())
        .expect("rigid motion keeps the mesh valid");
    let joints = JointSet::new(hand.joints.joints().iter().map(|j| r * j + t).collect()).expect("finite joints");
    PosedHand { mesh, joints }
}

/// Back-projects, crops and voxelizes a depth map into the cube.
pub fn voxelize_depth(depth: &DepthMap, k: &CameraIntrinsics, frame: &CubeFrame, dim: usize) -> Result<crate::VoxelGrid> {
    let cloud = crop_points(&depth_to_points(depth, k), frame);
    voxelize_points(&cloud, frame, dim)
}

#[derive(Serialize)]
struct SynthSample {
    index: usize,
    seed: u64,
    dir: String,
    palm_center: [f64; 3],
    depth_points: usize,
}

fn synth(a: &SynthArgs) -> Result<()> {
    if a.count == 0 || a.count > MAX_SYNTH_COUNT {
        return Err(Error::invalid(format!("--count must lie in 1..={MAX_SYNTH_COUNT}")));
    }
    check_dim("grid-dim", a.grid_dim)?;
    check_dim("shape-dim", a.shape_dim)?;
    if a.width == 0 || a.height == 0 {
        return Err(Error::invalid("image size must be non-zero"));
    }
    if !(a.perturb >= 0.0 && a.perturb.is_finite()) {
        return Err(Error::invalid("--perturb must be a non-negative distance"));
    }
    if a.seed.checked_add(a.count as u64 - 1).is_none() {
        return Err(Error::invalid("--seed + --count overflows"));
    }
    frame_at(Vec3::zeros(), &a.cube)?;
    let k = a.camera.intrinsics()?;
    let model = HandModel::new();

    let mut samples = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let seed = a.seed + i as u64;
        let hand = place_in_view(&model.pose(&sample_pose(seed))?);
        let frame = frame_at(hand.palm_center(), &a.cube)?;
        let depth = render_depth(&hand.mesh, &k, a.width, a.height)?;
        let pgm = io::write_depth(&depth)?;
        // Voxelize what a reader of the PGM sees: depths rounded to whole mm.
        let stored = io::read_depth(&pgm)?;
        let input = voxelize_depth(&stored, &k, &frame, a.grid_dim)?;
        let shape = voxelize_mesh(&hand.mesh, &frame, a.shape_dim)?;

        let name = format!("sample_{i:04}");
        let dir = a.out.join(&name);
        let mut out = Outputs::default();
        out.add(dir.join("mesh.obj"), io::write_mesh(&hand.mesh));
        out.add(dir.join("joints.json"), io::write_joints(&hand.joints));
        out.add(dir.join("joints22.json"), io::write_joints(&hand.joints22()));
        out.add(dir.join("depth.pgm"), pgm);
        out.add(dir.join("input.vgrd"), io::write_grid(&input));
        out.add(dir.join("shape.vgrd"), io::write_grid(&shape));
        if a.perturb > 0.0 {
            let coarse = perturb_surface(&hand.mesh, a.perturb, seed)?;
            out.add(dir.join("coarse.obj"), io::write_mesh(&coarse));
        }
        out.write()?;
        let c = hand.palm_center();
        samples.push(SynthSample {
            index: i,
            seed,
            dir: name,
            palm_center: [c.x, c.y, c.z],
            depth_points: stored.values().iter().filter(|d| **d > 0.0).count(),
        });
    }
    let mut out = Outputs::default();
    out.add_report(&a.report, &json!({ "samples": samples }));
    out.write()
}

fn voxelize(a: &VoxelizeArgs) -> Result<()> {
    let joints = io::load_joints(&a.joints)?;
    let frame = frame_at(cube_center(&joints)?, &a.cube)?;
    let (grid, source) = match (&a.depth, &a.mesh) {
        (Some(depth), None) => {
            check_dim("grid-dim", a.grid_dim)?;
            let k = a.camera.intrinsics()?;
            let d = io::load_depth(depth)?;
            (voxelize_depth(&d, &k, &frame, a.grid_dim)?, "depth")
        }
        (None, Some(mesh)) => {
            check_dim("shape-dim", a.shape_dim)?;
            let m = io::load_mesh(mesh)?;
            (voxelize_mesh(&m, &frame, a.shape_dim)?, "mesh")
        }
        _ => return Err(Error::invalid("pass exactly one of --depth and --mesh")),
    };
    let mut out = Outputs::default();
    out.add(&a.out, io::write_grid(&grid));
    out.add_report(
        &a.report,
        &json!({
            "source": source,
            "dims": grid.dims(),
            "voxel_size": grid.voxel_size(),
            "occupied": grid.count_at_least(0.5),
        }),
    );
    out.write()
}

fn heatmap(a: &HeatmapArgs) -> Result<()> {
    let mut out = Outputs::default();
    match (&a.joints, &a.decode) {
        (Some(path), None) => {
            check_dim("heatmap-dim", a.heatmap_dim)?;
            let joints = io::load_joints(path)?;
            let center = match a.center {
                Some(c) => Vec3::from(c),
                None => cube_center(&joints)?,
            };
            let frame = frame_at(center, &a.cube)?;
            let sigma = a.sigma.unwrap_or_else(|| default_sigma(&frame, a.heatmap_dim));
            let stack = make_heatmaps(&joints, &frame, a.heatmap_dim, sigma)?;
            out.add(&a.out, io::write_heatmaps(&stack));
        }
        (None, Some(path)) => {
            let stack = io::load_heatmaps(path)?;
            let joints = decode_heatmaps(&stack)?;
            out.add(&a.out, io::write_joints(&joints));
        }
        _ => return Err(Error::invalid("pass exactly one of --joints and --decode")),
    }
    out.write()
}

fn augment(a: &AugmentArgs) -> Result<()> {
    let grid = io::load_grid(&a.grid)?;
    let frame = grid
        .frame()
        .ok_or_else(|| Error::invalid("augmentation needs a cubic grid"))?;
    let params = match a.seed {
        Some(seed) => sample_params(seed),
        None => {
            let r = a.rotate.unwrap_or([0.0; 3]);
            let t = a.translate.unwrap_or([0.0; 3]);
            AugmentParams::new(r[0], r[1], r[2], a.scale.unwrap_or(1.0), Vec3::from(t))?
        }
    };
    let joints = a.joints.as_ref().map(io::load_joints).transpose()?;
    let heatmaps = a.heatmaps.as_ref().map(io::load_heatmaps).transpose()?;

    let mut out = Outputs::default();
    out.add(&a.out, io::write_grid(&transform_grid(&grid, &params)?));
    let mut outside = Vec::new();
    if let (Some(j), Some(path)) = (&joints, &a.joints_out) {
        let moved = transform_joints(j, &frame, grid.dims()[0], &params)?;
        outside = moved.outside.clone();
        out.add(path, io::write_joints(&moved.joints));
    }
    if let (Some(h), Some(path)) = (&heatmaps, &a.heatmaps_out) {
        // Translation is in voxels of the input grid; carry it over to the
        // heatmap lattice so both move by the same distance.
        let hm_voxel = h.maps().first().map_or(grid.voxel_size(), |m| m.voxel_size());
        let t = params.similarity().with_translation_scaled(grid.voxel_size() / hm_voxel);
        out.add(path, io::write_heatmaps(&transform_heatmaps_with(h, &t)?));
    }
    out.add_report(
        &a.report,
        &json!({
            "theta_deg": [params.theta_x, params.theta_y, params.theta_z],
            "scale": params.scale,
            "translation_voxels": [params.translation.x, params.translation.y, params.translation.z],
            "joints_outside": outside,
        }),
    );
    out.write()
}

fn register(a: &RegisterArgs) -> Result<()> {
    let mesh = io::load_mesh(&a.mesh)?;
    let target = io::load_grid(&a.target)?;
    let frame = target
        .frame()
        .ok_or_else(|| Error::invalid("registration target must be a cubic grid"))?;
    let method = match a.method {
        MethodArg::Dispfield => RegisterMethod::DisplacementField(FieldRegistration {
            estimator: None,
            smooth_iterations: a.iterations.unwrap_or(crate::register::DEFAULT_SMOOTH_ITERATIONS),
            smooth_lambda: a.lambda,
        }),
        MethodArg::Nrga => {
            let mut cfg = NrgaConfig::for_grid(&target);
            if let Some(n) = a.iterations {
                cfg.iterations = n;
            }
            RegisterMethod::Nrga(cfg)
        }
    };
    let (fitted, report) = register_with_report(&mesh, &target, &method, &frame)?;
    let mut out = Outputs::default();
    out.add(&a.out, io::write_mesh(&fitted));
    out.add_report(&a.report, &report);
    out.write()
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut metrics: BTreeMap<&str, f64> = BTreeMap::new();
    if let (Some(p), Some(g)) = (&a.pred_mesh, &a.gt_mesh) {
        metrics.insert("vertex_error", vertex_error(&io::load_mesh(p)?, &io::load_mesh(g)?)?);
    }
    if let (Some(p), Some(g)) = (&a.pred_joints, &a.gt_joints) {
        metrics.insert("joint_error", joint_error(&io::load_joints(p)?, &io::load_joints(g)?)?);
    }
    if let (Some(p), Some(g)) = (&a.pred_grid, &a.gt_grid) {
        metrics.insert("shape_bce", shape_error(&io::load_grid(p)?, &io::load_grid(g)?)?);
    }
    if metrics.is_empty() {
        return Err(Error::invalid("nothing to evaluate; pass a --pred-*/--gt-* pair"));
    }
    let bytes = to_json(&metrics);
    match &a.report {
        Some(path) => {
            let mut out = Outputs::default();
            out.add(path.as_path(), bytes);
            out.write()
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_unknown_flags() {
        assert_eq!(run(["handvox", "--help"]), EXIT_OK);
        assert_eq!(run(["handvox", "synth", "--help"]), EXIT_OK);
        assert_eq!(run(["handvox", "--no-such-flag"]), EXIT_INVALID);
        assert_eq!(run(["handvox", "eval", "--bogus", "1"]), EXIT_INVALID);
        assert_eq!(run(["handvox"]), EXIT_INVALID);
    }

    #[test]
    fn missing_input_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g.vgrd");
        let code = run([
            "handvox".as_ref(),
            "voxelize".as_ref(),
            "--mesh".as_ref(),
            dir.path().join("none.obj").as_os_str(),
            "--joints".as_ref(),
            dir.path().join("none.json").as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ] as [&std::ffi::OsStr; 8]);
        assert_eq!(code, EXIT_IO);
        assert!(!out.exists());
    }

    #[test]
    fn triples() {
        assert_eq!(parse_triple("1, -2.5,3").unwrap(), [1.0, -2.5, 3.0]);
        assert!(parse_triple("1,2").is_err());
        assert!(parse_triple("1,x,2").is_err());
    }
}
