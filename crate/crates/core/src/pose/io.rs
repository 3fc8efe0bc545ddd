//! Plain-text trajectory files.
//!
//! Native format: one frame per line, `timestamp x y z alpha beta gamma`
//! (seconds, millimeters, radians), separated by single spaces. Lines starting
//! with `#` and blank lines are ignored. Numbers are written in shortest
//! round-trip form, so write/read is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{PoseSE3, Trajectory};
use crate::error::{Error, Result};

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut out = String::from("# timestamp x y z alpha beta gamma\n");
    for (t, p) in traj.frames() {
        let [x, y, z] = p.trl;
        let [a, b, g] = p.rot;
        let _ = writeln!(out, "{t} {x} {y} {z} {a} {b} {g}");
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    std::fs::write(path, format_trajectory(traj)).map_err(|e| Error::io(path, e))
}

fn parse_lines<const N: usize>(text: &str) -> Result<Vec<[f64; N]>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != N {
            return Err(Error::format(
                "trajectory",
                format!("line {}: expected {N} fields, found {}", lineno + 1, fields.len()),
            ));
        }
        let mut row = [0.0; N];
        for (slot, f) in row.iter_mut().zip(fields) {
            *slot = f
                .parse()
                .map_err(|_| Error::format("trajectory", format!("line {}: bad number {f:?}", lineno + 1)))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let frames = parse_lines::<7>(text)?
        .into_iter()
        .map(|r| Ok((r[0], PoseSE3::new([r[4], r[5], r[6]], [r[1], r[2], r[3]])?)))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(frames)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text)
}

/// Parses `timestamp tx ty tz qx qy qz qw` lines (Hamilton quaternion, scalar last).
pub fn parse_quaternion_trajectory(text: &str) -> Result<Trajectory> {
    let frames = parse_lines::<8>(text)?
        .into_iter()
        .map(|r| {
            let q = Quaternion::new(r[7], r[4], r[5], r[6]);
            if !(q.norm() > 0.0) {
                return Err(Error::format("trajectory", "zero quaternion"));
            }
            let rot = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
            let pose = PoseSE3::from_rotation_translation(rot.matrix(), &Vector3::new(r[1], r[2], r[3]));
            Ok((r[0], pose))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(frames)
}

pub fn read_quaternion_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_quaternion_trajectory(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let traj = Trajectory::new(vec![
            (0.0, PoseSE3::new([0.1, -0.2, 3.0], [1.0 / 3.0, 2e-17, -5.5]).unwrap()),
            (0.04, PoseSE3::new([1e-300, 0.0, -1.0], [1e10, 0.1 + 0.2, 7.0]).unwrap()),
        ])
        .unwrap();
        let back = parse_trajectory(&format_trajectory(&traj)).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn comments_and_blank_lines() {
        let t = parse_trajectory("# header\n\n0 1 2 3 0 0 0\n# mid\n0.5 1 2 3 0.1 0 0\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.pose(0).unwrap().trl, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn malformed_lines() {
        assert!(parse_trajectory("0 1 2 3 0 0\n").is_err());
        assert!(parse_trajectory("0 1 2 x 0 0 0\n").is_err());
        assert!(parse_trajectory("1 0 0 0 0 0 0\n0 0 0 0 0 0 0\n").is_err());
    }

    #[test]
    fn quaternion_import() {
        // 90 degrees about z.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = parse_quaternion_trajectory(&format!("0 1 2 3 0 0 {h} {h}\n")).unwrap();
        let p = t.pose(0).unwrap();
        assert!((p.rot[2] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(p.rot[0].abs() < 1e-12 && p.rot[1].abs() < 1e-12);
        assert_eq!(p.trl, [1.0, 2.0, 3.0]);
    }
}
