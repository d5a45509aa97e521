//! Procedural articulated hand for end-to-end testing.
//!
//! The skeleton has 21 joints: the wrist, then for each finger (thumb,
//! index, middle, ring, little) the MCP, PIP, DIP and tip joints. The
//! surface is a palm ellipsoid plus one tapered capsule per finger,
//! tessellated to exactly [`VERTEX_COUNT`] vertices. Every vertex follows a
//! single rigid frame: its bone, or for the ring sitting on a joint, the
//! half-way rotation of that joint, which keeps flexed joints from folding
//! the tube onto itself. Posing never changes the topology.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{rot_x, rot_y, rot_z};
use crate::error::{Error, Result};
use crate::heatmap::JointSet;
use crate::voxgrid::{CameraIntrinsics, DepthMap, Mesh};
use crate::Vec3;

/// Vertex count of the hand surface.
pub const VERTEX_COUNT: usize = 1193;
pub const JOINT_COUNT: usize = 21;
pub const FINGER_COUNT: usize = 5;

const RING_SEGMENTS: usize = 12;
const TUBE_RINGS: usize = 10;
const CAP_RINGS: usize = 2;
const PALM_STACKS: usize = 11;
const PALM_SLICES: usize = 31;
const PALM_CENTER: [f64; 3] = [0.0, 45.0, 0.0];
const PALM_AXES: [f64; 3] = [42.0, 52.0, 14.0];

/// Index of a finger's MCP joint in the 21-joint layout.
pub fn mcp_index(finger: usize) -> usize {
    1 + 4 * finger
}

/// Static description of one finger in the hand frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerShape {
    pub mcp: Vec3,
    /// Rest orientation: maps the finger's canonical frame (bones along +y,
    /// flexion about +x toward −z) into the hand frame.
    pub base: Matrix3<f64>,
    /// Proximal, intermediate and distal bone lengths (mm).
    pub bones: [f64; 3],
    /// Capsule radius at the MCP (mm).
    pub radius: f64,
}

/// Joint angle limits in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerLimits {
    pub mcp_flex: (f64, f64),
    pub abduction: (f64, f64),
    pub pip_flex: (f64, f64),
    pub dip_flex: (f64, f64),
}

pub const FINGER_LIMITS: FingerLimits = FingerLimits {
    mcp_flex: (-10.0, 80.0),
    abduction: (-15.0, 15.0),
    pip_flex: (0.0, 85.0),
    dip_flex: (0.0, 70.0),
};

pub const THUMB_LIMITS: FingerLimits = FingerLimits {
    mcp_flex: (-10.0, 50.0),
    abduction: (-20.0, 20.0),
    pip_flex: (0.0, 60.0),
    dip_flex: (0.0, 70.0),
};

pub const MAX_GLOBAL_ROTATION_DEG: f64 = 30.0;
pub const MAX_GLOBAL_TRANSLATION_MM: f64 = 20.0;

pub fn limits(finger: usize) -> &'static FingerLimits {
    if finger == 0 {
        &THUMB_LIMITS
    } else {
        &FINGER_LIMITS
    }
}

/// Bone binding of one template vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Binding {
    /// Moves with the wrist (global transform only); position in the hand frame.
    Palm(Vec3),
    /// Position in the canonical frame `frame` of `finger`, relative to the
    /// frame origin. Even frames sit on a joint and turn by half of that
    /// joint's rotation; odd frames are the proximal, middle and distal bones.
    Finger { finger: usize, frame: usize, local: Vec3 },
}

/// Skeleton, template surface and skinning of the synthetic hand.
#[derive(Debug, Clone)]
pub struct HandModel {
    fingers: [FingerShape; FINGER_COUNT],
    bindings: Vec<Binding>,
    faces: Vec<[usize; 3]>,
}

/// Angles of one finger, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FingerPose {
    pub mcp_flex: f64,
    pub abduction: f64,
    pub pip_flex: f64,
    pub dip_flex: f64,
}

/// Articulation plus a global rigid transform about the wrist.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseParams {
    pub fingers: [FingerPose; FINGER_COUNT],
    /// Euler angles (degrees) applied as `Rot_x · Rot_y · Rot_z`.
    pub global_rotation: Vec3,
    /// Millimetres, applied after the rotation.
    pub global_translation: Vec3,
}

impl PoseParams {
    /// All angles zero, identity root transform.
    pub fn rest() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let within = |v: f64, (lo, hi): (f64, f64)| v.is_finite() && v >= lo && v <= hi;
        for (f, p) in self.fingers.iter().enumerate() {
            let l = limits(f);
            if !(within(p.mcp_flex, l.mcp_flex)
                && within(p.abduction, l.abduction)
                && within(p.pip_flex, l.pip_flex)
                && within(p.dip_flex, l.dip_flex))
            {
                return Err(Error::invalid(format!("finger {f} pose {p:?} exceeds its joint limits")));
            }
        }
        let g = MAX_GLOBAL_ROTATION_DEG;
        if !self.global_rotation.iter().all(|&a| within(a, (-g, g))) {
            return Err(Error::invalid("global rotation exceeds ±30 degrees"));
        }
        let t = MAX_GLOBAL_TRANSLATION_MM;
        if !self.global_translation.iter().all(|&a| within(a, (-t, t))) {
            return Err(Error::invalid("global translation exceeds ±20 mm"));
        }
        Ok(())
    }

    fn root_rotation(&self) -> Matrix3<f64> {
        rot_x(self.global_rotation.x) * rot_y(self.global_rotation.y) * rot_z(self.global_rotation.z)
    }
}

/// Seed 0 gives the rest pose; any other seed draws every angle uniformly
/// within its limits.
pub fn sample_pose(seed: u64) -> PoseParams {
    if seed == 0 {
        return PoseParams::rest();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
    let mut fingers = [FingerPose::default(); FINGER_COUNT];
    for (f, p) in fingers.iter_mut().enumerate() {
        let l = limits(f);
        *p = FingerPose {
            mcp_flex: draw(l.mcp_flex),
            abduction: draw(l.abduction),
            pip_flex: draw(l.pip_flex),
            dip_flex: draw(l.dip_flex),
        };
    }
    let g = (-MAX_GLOBAL_ROTATION_DEG, MAX_GLOBAL_ROTATION_DEG);
    let t = (-MAX_GLOBAL_TRANSLATION_MM, MAX_GLOBAL_TRANSLATION_MM);
    let global_rotation = Vec3::new(draw(g), draw(g), draw(g));
    let global_translation = Vec3::new(draw(t), draw(t), draw(t));
    PoseParams {
        fingers,
        global_rotation,
        global_translation,
    }
}

/// A posed hand: surface and 21 joints in the same frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedHand {
    pub mesh: Mesh,
    pub joints: JointSet,
}

impl PosedHand {
    /// Mean of the wrist and the five MCP joints.
    pub fn palm_center(&self) -> Vec3 {
        palm_center(&self.joints)
    }

    /// The 21 joints followed by the palm centre.
    pub fn joints22(&self) -> JointSet {
        let mut j = self.joints.joints().to_vec();
        j.push(self.palm_center());
        JointSet::new(j).expect("finite joints")
    }

    pub fn translated(&self, t: &Vec3) -> PosedHand {
        PosedHand {
            mesh: self.mesh.translated(t),
            joints: self.joints.translated(t),
        }
    }
}

/// Palm centre of a 21- or 22-joint set. For 22 joints the stored last
/// entry is returned.
pub fn palm_center(joints: &JointSet) -> Vec3 {
    let j = joints.joints();
    if j.len() == JOINT_COUNT + 1 {
        return j[JOINT_COUNT];
    }
    assert!(j.len() >= JOINT_COUNT, "palm centre needs the 21-joint layout");
    let sum = j[0] + (0..FINGER_COUNT).map(|f| j[mcp_index(f)]).sum::<Vec3>();
    sum / (FINGER_COUNT + 1) as f64
}

fn finger_shapes() -> [FingerShape; FINGER_COUNT] {
    let splay = |deg: f64| rot_z(deg);
    [
        FingerShape {
            mcp: Vec3::new(-30.0, 30.0, -8.0),
            base: rot_z(50.0) * rot_x(-20.0),
            bones: [34.0, 30.0, 26.0],
            radius: 10.0,
        },
        FingerShape {
            mcp: Vec3::new(-24.0, 85.0, 0.0),
            base: splay(8.0),
            bones: [40.0, 24.0, 20.0],
            radius: 9.0,
        },
        FingerShape {
            mcp: Vec3::new(-6.0, 90.0, 0.0),
            base: splay(2.0),
            bones: [44.0, 28.0, 21.0],
            radius: 9.0,
        },
        FingerShape {
            mcp: Vec3::new(12.0, 86.0, 0.0),
            base: splay(-4.0),
            bones: [41.0, 27.0, 20.0],
            radius: 8.5,
        },
        FingerShape {
            mcp: Vec3::new(28.0, 78.0, 0.0),
            base: splay(-10.0),
            bones: [32.0, 20.0, 18.0],
            radius: 7.5,
        },
    ]
}

impl Default for HandModel {
    fn default() -> Self {
        Self::new()
    }
}

impl HandModel {
    pub fn new() -> Self {
        let fingers = finger_shapes();
        let mut bindings = Vec::with_capacity(VERTEX_COUNT);
        let mut faces = Vec::new();
        build_palm(&mut bindings, &mut faces);
        for (f, shape) in fingers.iter().enumerate() {
            build_finger(f, shape, &mut bindings, &mut faces);
        }
        debug_assert_eq!(bindings.len(), VERTEX_COUNT);
        Self {
            fingers,
            bindings,
            faces,
        }
    }

    pub fn fingers(&self) -> &[FingerShape; FINGER_COUNT] {
        &self.fingers
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Parent of each joint in the 21-joint tree (the wrist has none).
    pub fn parents() -> [Option<usize>; JOINT_COUNT] {
        let mut p = [None; JOINT_COUNT];
        for f in 0..FINGER_COUNT {
            let m = mcp_index(f);
            p[m] = Some(0);
            p[m + 1] = Some(m);
            p[m + 2] = Some(m + 1);
            p[m + 3] = Some(m + 2);
        }
        p
    }

    /// The surface in the rest pose.
    pub fn template(&self) -> Mesh {
        self.pose(&PoseParams::rest()).expect("rest pose is valid").mesh
    }

    /// Forward kinematics and rigid skinning.
    pub fn pose(&self, p: &PoseParams) -> Result<PosedHand> {
        p.validate()?;
        let root = p.root_rotation();
        let to_world = |x: Vec3| root * x + p.global_translation;

        let mut joints = vec![Vec3::zeros(); JOINT_COUNT];
        // Per finger: (origin in hand frame, orientation in hand frame) of
        // the MCP joint, proximal bone, PIP joint, middle bone, DIP joint, distal bone.
        let mut frames = [[(Vec3::zeros(), Matrix3::identity()); 6]; FINGER_COUNT];
        for (f, shape) in self.fingers.iter().enumerate() {
            let fp = &p.fingers[f];
            let mcp = rot_z(fp.abduction) * rot_x(-fp.mcp_flex);
            let half_mcp = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(mcp)).powf(0.5).to_rotation_matrix().into_inner();
            let r0 = shape.base * mcp;
            let r1 = r0 * rot_x(-fp.pip_flex);
            let r2 = r1 * rot_x(-fp.dip_flex);
            let halves = [
                shape.base * half_mcp,
                r0 * rot_x(-0.5 * fp.pip_flex),
                r1 * rot_x(-0.5 * fp.dip_flex),
            ];
            let mut at = shape.mcp;
            let m = mcp_index(f);
            joints[m] = at;
            for (b, r) in [r0, r1, r2].into_iter().enumerate() {
                frames[f][2 * b] = (at, halves[b]);
                frames[f][2 * b + 1] = (at, r);
                at += r * Vec3::new(0.0, shape.bones[b], 0.0);
                joints[m + 1 + b] = at;
            }
        }

        let vertices = self
            .bindings
            .iter()
            .map(|b| match *b {
                Binding::Palm(x) => to_world(x),
                Binding::Finger { finger, frame, local } => {
                    let (start, r) = frames[finger][frame];
                    to_world(start + r * local)
                }
            })
            .collect();
        let joints = joints.into_iter().map(to_world).collect();
        Ok(PosedHand {
            mesh: Mesh::new(vertices, self.faces.clone())?,
            joints: JointSet::new(joints)?,
        })
    }
}

/// Convenience wrapper over [`HandModel::pose`].
pub fn pose_hand(model: &HandModel, p: &PoseParams) -> Result<PosedHand> {
    model.pose(p)
}

fn build_palm(bindings: &mut Vec<Binding>, faces: &mut Vec<[usize; 3]>) {
    let c = Vec3::from(PALM_CENTER);
    let [ax, ay, az] = PALM_AXES;
    let base = bindings.len();
    // Poles along y: bottom (wrist side), then latitude rings, then top.
    bindings.push(Binding::Palm(c + Vec3::new(0.0, -ay, 0.0)));
    for s in 1..=PALM_STACKS {
        let polar = std::f64::consts::PI * s as f64 / (PALM_STACKS + 1) as f64;
        let (sp, cp) = polar.sin_cos();
        for k in 0..PALM_SLICES {
            let az_angle = 2.0 * std::f64::consts::PI * k as f64 / PALM_SLICES as f64;
            let (sa, ca) = az_angle.sin_cos();
            bindings.push(Binding::Palm(c + Vec3::new(ax * sp * ca, -ay * cp, az * sp * sa)));
        }
    }
    bindings.push(Binding::Palm(c + Vec3::new(0.0, ay, 0.0)));
    let ring = |s: usize, k: usize| base + 1 + (s - 1) * PALM_SLICES + k % PALM_SLICES;
    let top = base + 1 + PALM_STACKS * PALM_SLICES;
    for k in 0..PALM_SLICES {
        faces.push([base, ring(1, k), ring(1, k + 1)]);
    }
    for s in 1..PALM_STACKS {
        for k in 0..PALM_SLICES {
            let (a, b, c2, d) = (ring(s, k), ring(s, k + 1), ring(s + 1, k), ring(s + 1, k + 1));
            faces.push([a, d, b]);
            faces.push([a, c2, d]);
        }
    }
    for k in 0..PALM_SLICES {
        faces.push([top, ring(PALM_STACKS, k + 1), ring(PALM_STACKS, k)]);
    }
}

fn build_finger(f: usize, shape: &FingerShape, bindings: &mut Vec<Binding>, faces: &mut Vec<[usize; 3]>) {
    // A closed capsule: a hemispherical cap buried in the palm, a tapered
    // tube with one ring on each joint, and a hemispherical cap ending at
    // the tip joint.
    let [l1, l2, l3] = shape.bones;
    let total = l1 + l2 + l3;
    let base_radius = shape.radius;
    let tip_radius = 0.72 * shape.radius;
    let tube_end = total - tip_radius;
    let radius_at = |s: f64| base_radius + (tip_radius - base_radius) * s / tube_end;

    // (arc length along the finger, ring radius, frame)
    let mut rings: Vec<(f64, f64, usize)> = Vec::with_capacity(TUBE_RINGS + 2 * CAP_RINGS);
    let cap_angle = |k: usize| std::f64::consts::FRAC_PI_2 * k as f64 / (CAP_RINGS + 1) as f64;
    for k in (1..=CAP_RINGS).rev() {
        let a = cap_angle(k);
        rings.push((-base_radius * a.sin(), base_radius * a.cos(), 0));
    }
    let distal = tube_end - l1 - l2;
    let tube: [(f64, usize); TUBE_RINGS] = [
        (0.0, 0),
        (0.25 * l1, 1),
        (0.5 * l1, 1),
        (0.75 * l1, 1),
        (l1, 2),
        (l1 + l2 / 3.0, 3),
        (l1 + 2.0 * l2 / 3.0, 3),
        (l1 + l2, 4),
        (l1 + l2 + 0.5 * distal, 5),
        (tube_end, 5),
    ];
    for (s, frame) in tube {
        rings.push((s, radius_at(s), frame));
    }
    for k in 1..=CAP_RINGS {
        let a = cap_angle(k);
        rings.push((tube_end + tip_radius * a.sin(), tip_radius * a.cos(), 5));
    }

    let bind = |s: f64, x: f64, z: f64, frame: usize| {
        let offset: f64 = shape.bones[..frame / 2].iter().sum();
        Binding::Finger {
            finger: f,
            frame,
            local: Vec3::new(x, s - offset, z),
        }
    };

    let base_pole = bindings.len();
    bindings.push(bind(-base_radius, 0.0, 0.0, 0));
    let first = bindings.len();
    for &(s, r, frame) in &rings {
        for j in 0..RING_SEGMENTS {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / RING_SEGMENTS as f64;
            bindings.push(bind(s, r * phi.cos(), r * phi.sin(), frame));
        }
    }
    let tip = bindings.len();
    bindings.push(bind(total, 0.0, 0.0, 5));

    let idx = |k: usize, j: usize| first + k * RING_SEGMENTS + j % RING_SEGMENTS;
    for j in 0..RING_SEGMENTS {
        faces.push([base_pole, idx(0, j), idx(0, j + 1)]);
    }
    for k in 0..rings.len() - 1 {
        for j in 0..RING_SEGMENTS {
            let (a, b, c, d) = (idx(k, j), idx(k, j + 1), idx(k + 1, j), idx(k + 1, j + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    let last = rings.len() - 1;
    for j in 0..RING_SEGMENTS {
        faces.push([idx(last, j), tip, idx(last, j + 1)]);
    }
}

/// Z-buffered point-splat rendering of the mesh surface.
///
/// Each triangle is sampled on a barycentric lattice fine enough that
/// neighbouring samples project less than half a pixel apart; each sample
/// writes its depth to the nearest pixel, keeping the smallest depth.
pub fn render_depth(mesh: &Mesh, k: &CameraIntrinsics, width: usize, height: usize) -> Result<DepthMap> {
    if let Some(v) = mesh.vertices().iter().find(|v| v.z <= 0.0) {
        return Err(Error::invalid(format!("vertex at z = {} is behind the camera", v.z)));
    }
    let mut depth = DepthMap::zeros(width, height)?;
    let f = k.fx.max(k.fy);
    {
        let buf = depth.values_mut();
        let mut splat = |p: &Vec3| {
            let (u, v) = k.project(p);
            let (u, v) = (u.round(), v.round());
            if u < 0.0 || v < 0.0 || u >= width as f64 || v >= height as f64 {
                return;
            }
            let i = v as usize * width + u as usize;
            if buf[i] == 0.0 || p.z < buf[i] {
                buf[i] = p.z;
            }
        };
        for v in mesh.vertices() {
            splat(v);
        }
        for face in mesh.faces() {
            let [a, b, c] = face.map(|i| mesh.vertices()[i]);
            let zmin = a.z.min(b.z).min(c.z);
            let spacing = 0.5 * zmin / f;
            let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let n = (longest / spacing).ceil().max(1.0) as usize;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                    splat(&(a + (b - a) * s + (c - a) * t));
                }
            }
        }
    }
    Ok(depth)
}

/// Smooth random normal offsets: each vertex moves along its normal by a
/// sum of low-frequency plane waves (wavelengths 60–140 mm), rescaled so
/// the mean absolute offset equals `mean_amplitude` (mm).
pub fn perturb_surface(mesh: &Mesh, mean_amplitude: f64, seed: u64) -> Result<Mesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Vec3, f64, f64)> = (0..4)
        .map(|_| {
            let dir = loop {
                let d = Vec3::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                );
                let n = d.norm();
                if n > 0.1 && n <= 1.0 {
                    break d / n;
                }
            };
            let wavelength = rng.random_range(60.0..=140.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let weight = rng.random_range(0.5..=1.0);
            (dir * (std::f64::consts::TAU / wavelength), phase, weight)
        })
        .collect();
    let normals = mesh.vertex_normals();
    let raw: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|v| waves.iter().map(|(w, ph, c)| c * (w.dot(v) + ph).sin()).sum())
        .collect();
    let mean_abs = raw.iter().map(|a| a.abs()).sum::<f64>() / raw.len().max(1) as f64;
    if mean_abs == 0.0 {
        return Ok(mesh.clone());
    }
    let scale = mean_amplitude / mean_abs;
    let moved = mesh
        .vertices()
        .iter()
        .zip(&normals)
        .zip(&raw)
        .map(|((v, n), a)| v + n * (a * scale))
        .collect();
    mesh.with_vertices(moved)
}
