//! Readers and writers for the on-disk formats.
//!
//! Binary formats are little-endian:
//!
//! ```text
//! VGRD  magic "VGRD" | u16 version=1 | u32 dx dy dz | f32 origin xyz | f32 voxel_size
//!       | u8 kind (0 occupancy, 1 probability) | payload (u8 or f32 per voxel)
//! VDSP  same header with magic "VDSP", kind 2, payload 3 x f32 per voxel
//! stack u32 count | f32 sigma | count VGRD blocks
//! ```
//!
//! Meshes are OBJ (`v` and triangular `f` records), depth maps 16-bit
//! big-endian PGM in millimetres, joints and point clouds JSON `[[x,y,z],…]`.
//! Origins and voxel sizes are stored as `f32`; payloads round-trip bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::heatmap::{HeatmapStack, JointSet};
use crate::register::DisplacementField;
use crate::voxgrid::{DepthMap, GridKind, Mesh, PointCloud, VoxelGrid};
use crate::Vec3;

pub const GRID_MAGIC: &[u8; 4] = b"VGRD";
pub const FIELD_MAGIC: &[u8; 4] = b"VDSP";
pub const FORMAT_VERSION: u16 = 1;
/// Largest accepted extent along any axis.
pub const MAX_DIM: u32 = 512;

/// Bytes before the payload: magic, version, dims, origin, voxel size, kind.
const HEADER_LEN: usize = 35;
const KIND_OCCUPANCY: u8 = 0;
const KIND_PROBABILITY: u8 = 1;
const KIND_DISPLACEMENT: u8 = 2;

fn format_error(format: &'static str, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Format {
        format,
        location: location.into(),
        message: message.into(),
    }
}

/// Bounds-checked little-endian cursor.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8], format: &'static str) -> Self {
        Self { bytes, pos: 0, format }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        format_error(self.format, format!("byte {}", self.pos), message)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.err(format!(
                "truncated {what}: need {n} bytes, {} left",
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.err(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

struct Header {
    dims: [usize; 3],
    origin: Vec3,
    voxel_size: f64,
    kind: u8,
}

fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], dims: [usize; 3], origin: &Vec3, voxel_size: f64, kind: u8) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for c in origin.iter() {
        out.extend_from_slice(&(*c as f32).to_le_bytes());
    }
    out.extend_from_slice(&(voxel_size as f32).to_le_bytes());
    out.push(kind);
}

fn read_header(cur: &mut Cursor, magic: &[u8; 4]) -> Result<Header> {
    let start = cur.pos;
    let m = cur.take(4, "magic")?;
    if m != magic {
        cur.pos = start;
        return Err(cur.err(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = cur.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(cur.err(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for (axis, d) in dims.iter_mut().enumerate() {
        let v = cur.u32("dimensions")?;
        if v == 0 || v > MAX_DIM {
            return Err(cur.err(format!("dimension {axis} = {v} outside 1..={MAX_DIM}")));
        }
        *d = v as usize;
    }
    let mut origin = Vec3::zeros();
    for c in origin.iter_mut() {
        *c = cur.f32("origin")? as f64;
    }
    let voxel_size = cur.f32("voxel size")? as f64;
    if !origin.iter().all(|c| c.is_finite()) || !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(cur.err("origin must be finite and voxel size positive"));
    }
    let kind = cur.u8("kind")?;
    Ok(Header {
        dims,
        origin,
        voxel_size,
        kind,
    })
}

fn grid_kind_byte(kind: GridKind) -> u8 {
    match kind {
        GridKind::Occupancy => KIND_OCCUPANCY,
        GridKind::Probability => KIND_PROBABILITY,
    }
}

fn write_grid_into(out: &mut Vec<u8>, g: &VoxelGrid) {
    write_header(out, GRID_MAGIC, g.dims(), &g.origin(), g.voxel_size(), grid_kind_byte(g.kind()));
    match g.kind() {
        GridKind::Occupancy => out.extend(g.data().iter().map(|&v| v as u8)),
        GridKind::Probability => {
            for v in g.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
}

/// Serializes a grid as a VGRD block.
pub fn write_grid(g: &VoxelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * g.len());
    write_grid_into(&mut out, g);
    out
}

fn read_grid_from(cur: &mut Cursor) -> Result<VoxelGrid> {
    let h = read_header(cur, GRID_MAGIC)?;
    let n = h.dims[0] * h.dims[1] * h.dims[2];
    let (kind, data) = match h.kind {
        KIND_OCCUPANCY => {
            let raw = cur.take(n, "occupancy payload")?;
            if let Some(i) = raw.iter().position(|&b| b > 1) {
                return Err(format_error(
                    "VGRD",
                    format!("byte {}", cur.pos - n + i),
                    format!("occupancy value {} is not 0 or 1", raw[i]),
                ));
            }
            (GridKind::Occupancy, raw.iter().map(|&b| b as f32).collect())
        }
        KIND_PROBABILITY => {
            let raw = cur.take(4 * n, "probability payload")?;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            (GridKind::Probability, data)
        }
        k => return Err(cur.err(format!("unknown grid kind {k}"))),
    };
    VoxelGrid::new(h.dims, h.origin, h.voxel_size, kind, data)
        .map_err(|e| format_error("VGRD", "payload", e.to_string()))
}

/// Parses exactly one VGRD block.
pub fn read_grid(bytes: &[u8]) -> Result<VoxelGrid> {
    let mut cur = Cursor::new(bytes, "VGRD");
    let g = read_grid_from(&mut cur)?;
    cur.finish()?;
    Ok(g)
}

/// Serializes a cubic displacement field as VDSP.
pub fn write_field(f: &DisplacementField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 12 * f.vectors().len());
    write_header(&mut out, FIELD_MAGIC, [f.dim(); 3], &f.origin(), f.voxel_size(), KIND_DISPLACEMENT);
    for v in f.vectors() {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_field(bytes: &[u8]) -> Result<DisplacementField> {
    let mut cur = Cursor::new(bytes, "VDSP");
    let h = read_header(&mut cur, FIELD_MAGIC)?;
    if h.kind != KIND_DISPLACEMENT {
        return Err(cur.err(format!("kind {} is not a displacement field", h.kind)));
    }
    if h.dims[0] != h.dims[1] || h.dims[1] != h.dims[2] {
        return Err(cur.err(format!("displacement field must be cubic, got {:?}", h.dims)));
    }
    let n = h.dims[0].pow(3);
    let raw = cur.take(12 * n, "vector payload")?;
    cur.finish()?;
    let vectors = raw
        .chunks_exact(12)
        .map(|c| {
            let f = |k: usize| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap()) as f64;
            Vec3::new(f(0), f(1), f(2))
        })
        .collect();
    DisplacementField::new(h.dims[0], h.origin, h.voxel_size, vectors)
        .map_err(|e| format_error("VDSP", "payload", e.to_string()))
}

pub fn write_heatmaps(stack: &HeatmapStack) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(stack.len() as u32).to_le_bytes());
    out.extend_from_slice(&(stack.sigma() as f32).to_le_bytes());
    for m in stack.maps() {
        write_grid_into(&mut out, m);
    }
    out
}

pub fn read_heatmaps(bytes: &[u8]) -> Result<HeatmapStack> {
    let mut cur = Cursor::new(bytes, "heatmap stack");
    let n = cur.u32("map count")? as usize;
    let sigma = cur.f32("sigma")? as f64;
    // Every block needs at least a header, so a huge count cannot allocate.
    if n > cur.remaining() / HEADER_LEN {
        return Err(cur.err(format!("{n} maps cannot fit in {} bytes", cur.remaining())));
    }
    let mut maps = Vec::with_capacity(n);
    for _ in 0..n {
        maps.push(read_grid_from(&mut cur)?);
    }
    cur.finish()?;
    HeatmapStack::new(maps, sigma).map_err(|e| format_error("heatmap stack", "header", e.to_string()))
}

/// OBJ text with `v` and `f` records; indices are written 1-based.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(40 * (mesh.len() + mesh.faces().len()));
    for v in mesh.vertices() {
        writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in mesh.faces() {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    s
}

/// Parses OBJ. Only triangles are accepted; `vt`/`vn` suffixes on face
/// corners are ignored, as are comments, groups and material records.
pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |m: String| format_error("OBJ", format!("line {}", n + 1), m);
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let Some(tag) = tok.next() else { continue };
        let rest: Vec<&str> = tok.collect();
        match tag {
            "v" => {
                if rest.len() != 3 && rest.len() != 4 {
                    return Err(err(format!("vertex needs 3 coordinates, got {}", rest.len())));
                }
                let mut c = [0.0; 3];
                for (k, t) in rest[..3].iter().enumerate() {
                    c[k] = t
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| err(format!("bad coordinate {t:?}")))?;
                }
                vertices.push(Vec3::from(c));
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(err(format!("only triangles are supported, got {} corners", rest.len())));
                }
                let mut f = [0usize; 3];
                for (k, t) in rest.iter().enumerate() {
                    let head = t.split('/').next().unwrap_or("");
                    let i: usize = head.parse().map_err(|_| err(format!("bad face index {t:?}")))?;
                    if i == 0 {
                        return Err(err("face index 0; OBJ indices start at 1".into()));
                    }
                    f[k] = i - 1;
                }
                faces.push(f);
            }
            "vt" | "vn" | "o" | "g" | "s" | "mtllib" | "usemtl" => {}
            other => return Err(err(format!("unsupported record {other:?}"))),
        }
    }
    Mesh::new(vertices, faces).map_err(|e| format_error("OBJ", "faces", e.to_string()))
}

/// 16-bit big-endian binary PGM; depths are rounded to whole millimetres.
pub fn write_depth(depth: &DepthMap) -> Result<Vec<u8>> {
    if let Some(v) = depth.values().iter().find(|v| v.round() > u16::MAX as f64) {
        return Err(Error::invalid(format!("depth {v} mm exceeds the 16-bit range")));
    }
    let mut out = format!("P5\n{} {}\n65535\n", depth.width(), depth.height()).into_bytes();
    for v in depth.values() {
        out.extend_from_slice(&(v.round() as u16).to_be_bytes());
    }
    Ok(out)
}

pub fn read_depth(bytes: &[u8]) -> Result<DepthMap> {
    let err = |pos: usize, m: String| format_error("PGM", format!("byte {pos}"), m);
    let mut pos = 0;
    // Header: magic then three integers, separated by whitespace and comments.
    let mut fields: Vec<u64> = Vec::with_capacity(3);
    if bytes.get(..2) != Some(b"P5".as_slice()) {
        return Err(err(0, "missing P5 magic".into()));
    }
    pos += 2;
    while fields.len() < 3 {
        match bytes.get(pos) {
            None => return Err(err(pos, "truncated header".into())),
            Some(b'#') => {
                while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                    pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(b) if b.is_ascii_digit() => {
                let start = pos;
                while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
                    pos += 1;
                }
                let s = std::str::from_utf8(&bytes[start..pos]).unwrap();
                let v = s.parse().map_err(|_| err(start, format!("number {s} out of range")))?;
                fields.push(v);
            }
            Some(b) => return Err(err(pos, format!("unexpected byte {b:#04x} in header"))),
        }
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(err(pos, "header must end with one whitespace byte".into())),
    }
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(err(pos, format!("invalid size {w}x{h} or maxval {maxval}")));
    }
    let sample = if maxval < 256 { 1 } else { 2 };
    let n = w.checked_mul(h).filter(|n| *n <= (bytes.len() - pos) as u64 / sample as u64);
    let Some(n) = n else {
        return Err(err(pos, format!("truncated payload for {w}x{h} image")));
    };
    let n = n as usize;
    if bytes.len() - pos != n * sample {
        return Err(err(pos + n * sample, "trailing bytes after payload".into()));
    }
    let payload = &bytes[pos..];
    let values = if sample == 1 {
        payload.iter().map(|&b| b as f64).collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    };
    DepthMap::new(w as usize, h as usize, values)
}

fn write_triples(points: &[Vec3]) -> String {
    let arr: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    serde_json::to_string(&arr).expect("finite coordinates serialize")
}

fn read_triples(text: &str, what: &'static str) -> Result<Vec<Vec3>> {
    let arr: Vec<[f64; 3]> = serde_json::from_str(text)
        .map_err(|e| format_error(what, format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    Ok(arr.into_iter().map(Vec3::from).collect())
}

pub fn write_joints(joints: &JointSet) -> String {
    write_triples(joints.joints())
}

/// An empty array is a valid, empty joint set.
pub fn read_joints(text: &str) -> Result<JointSet> {
    JointSet::new(read_triples(text, "joints JSON")?)
}

pub fn write_points(cloud: &PointCloud) -> String {
    write_triples(cloud.points())
}

pub fn read_points(text: &str) -> Result<PointCloud> {
    PointCloud::new(read_triples(text, "points JSON")?)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    Ok(std::fs::read(path)?)
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| format_error("text", format!("byte {}", e.utf8_error().valid_up_to()), "invalid UTF-8"))
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    read_grid(&read_bytes(path.as_ref())?)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<DisplacementField> {
    read_field(&read_bytes(path.as_ref())?)
}

pub fn load_heatmaps(path: impl AsRef<Path>) -> Result<HeatmapStack> {
    read_heatmaps(&read_bytes(path.as_ref())?)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    read_mesh(&read_text(path.as_ref())?)
}

pub fn load_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    read_depth(&read_bytes(path.as_ref())?)
}

pub fn load_joints(path: impl AsRef<Path>) -> Result<JointSet> {
    read_joints(&read_text(path.as_ref())?)
}

pub fn load_points(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_points(&read_text(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_grid(kind: GridKind) -> VoxelGrid {
        let data = (0..60)
            .map(|i| match kind {
                GridKind::Occupancy => (i % 3 == 0) as u8 as f32,
                GridKind::Probability => i as f32 / 59.0,
            })
            .collect();
        VoxelGrid::new([3, 4, 5], Vec3::new(-1.5, 2.25, 100.0), 0.5, kind, data).unwrap()
    }

    #[test]
    fn grid_round_trip() {
        for kind in [GridKind::Occupancy, GridKind::Probability] {
            let g = sample_grid(kind);
            let bytes = write_grid(&g);
            let back = read_grid(&bytes).unwrap();
            assert_eq!(back, g);
            assert_eq!(write_grid(&back), bytes);
        }
    }

    #[test]
    fn grid_header_errors() {
        let mut bytes = write_grid(&sample_grid(GridKind::Occupancy));
        bytes[0] = b'X';
        assert!(matches!(read_grid(&bytes), Err(Error::Format { .. })));

        let mut zero = write_grid(&sample_grid(GridKind::Occupancy));
        zero[6..10].copy_from_slice(&0u32.to_le_bytes());
        assert!(read_grid(&zero).is_err());

        let mut huge = write_grid(&sample_grid(GridKind::Occupancy));
        huge[6..10].copy_from_slice(&513u32.to_le_bytes());
        assert!(read_grid(&huge).is_err());

        let mut bad_value = write_grid(&sample_grid(GridKind::Occupancy));
        *bad_value.last_mut().unwrap() = 7;
        assert!(read_grid(&bad_value).is_err());
    }

    #[test]
    fn truncations_are_errors() {
        let bytes = write_grid(&sample_grid(GridKind::Probability));
        for n in 0..bytes.len() {
            assert!(read_grid(&bytes[..n]).is_err(), "prefix {n}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(read_grid(&long).is_err());
    }

    #[test]
    fn field_round_trip() {
        let vectors = (0..27).map(|i| Vec3::new(i as f64, -0.5 * i as f64, 0.25)).collect();
        let f = DisplacementField::new(3, Vec3::new(1.0, 2.0, 3.0), 2.0, vectors).unwrap();
        let bytes = write_field(&f);
        assert_eq!(bytes[34], 2);
        let back = read_field(&bytes).unwrap();
        assert_eq!(back, f);
        assert!(read_grid(&bytes).is_err());
    }

    #[test]
    fn heatmap_stack_round_trip() {
        let g = sample_grid(GridKind::Probability);
        let stack = HeatmapStack::new(vec![g.clone(), g], 1.5).unwrap();
        let bytes = write_heatmaps(&stack);
        assert_eq!(read_heatmaps(&bytes).unwrap(), stack);
        assert!(read_heatmaps(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn obj_round_trip_and_errors() {
        let m = Mesh::new(
            vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0 / 3.0, 0.0, 7.0), Vec3::new(0.0, 1e-9, -2.5)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let text = write_mesh(&m);
        assert!(text.contains("f 1 2 3"));
        assert_eq!(read_mesh(&text).unwrap(), m);

        let zero = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n";
        match read_mesh(zero) {
            Err(Error::Format { location, .. }) => assert_eq!(location, "line 4"),
            other => panic!("{other:?}"),
        }
        assert!(read_mesh("v 0 0\n").is_err());
        assert!(read_mesh("v 0 0 0\nf 1 2 3\n").is_err());
        let slashed = "# c\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n";
        assert_eq!(read_mesh(slashed).unwrap().faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn pgm_round_trip() {
        let d = DepthMap::new(3, 2, vec![0.0, 500.0, 65535.0, 1.0, 256.0, 400.4]).unwrap();
        let bytes = write_depth(&d).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n65535\n"));
        let back = read_depth(&bytes).unwrap();
        assert_eq!(back.values(), &[0.0, 500.0, 65535.0, 1.0, 256.0, 400.0]);
        assert!(read_depth(&bytes[..bytes.len() - 1]).is_err());
        let commented = b"P5 # depth\n1 1\n255\n\x07";
        assert_eq!(read_depth(commented).unwrap().values(), &[7.0]);
        let too_deep = DepthMap::new(1, 1, vec![70000.0]).unwrap();
        assert!(write_depth(&too_deep).is_err());
    }

    #[test]
    fn joints_json() {
        let j = JointSet::new(vec![Vec3::new(0.1, -2.0, 300.123456789)]).unwrap();
        assert_eq!(read_joints(&write_joints(&j)).unwrap(), j);
        assert!(read_joints("[]").unwrap().is_empty());
        assert!(read_joints("[[1,2]]").is_err());
        assert!(read_joints("{").is_err());
    }
}
