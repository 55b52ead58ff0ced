//! BVH motion files.
//!
//! `End Site` blocks carry no channels and are not kept as joints; leaves
//! are written back with a zero end-site offset.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

use super::{Joint, MotionClip, Skeleton};
use crate::mesh::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum BvhError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown channel `{name}`")]
    UnknownChannel { line: usize, name: String },

    #[error("line {line}: motion row has {found} values, hierarchy declares {expected} channels")]
    ChannelCount { line: usize, expected: usize, found: usize },

    #[error("line {line}: header declares {declared} frames but {found} motion rows follow")]
    FrameCount { line: usize, declared: usize, found: usize },

    #[error("line {line}: `{token}` is not a number")]
    Number { line: usize, token: String },

    #[error("cannot write joint `{0}`: rest rotation is not the identity")]
    RestRotation(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Channel {
    Pos(usize),
    Rot(usize),
}

impl Channel {
    fn parse(s: &str) -> Option<Self> {
        let axis = match s.as_bytes().first()? {
            b'X' | b'x' => 0,
            b'Y' | b'y' => 1,
            b'Z' | b'z' => 2,
            _ => return None,
        };
        match &s[1..] {
            "position" => Some(Channel::Pos(axis)),
            "rotation" => Some(Channel::Rot(axis)),
            _ => None,
        }
    }
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    at: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (n, line) in text.lines().enumerate() {
            for tok in line.split_whitespace() {
                items.push((n + 1, tok));
            }
        }
        Self { items, at: 0 }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.at)
            .or_else(|| self.items.last())
            .map_or(1, |t| t.0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), BvhError> {
        let t = self.items.get(self.at).copied().ok_or_else(|| BvhError::Syntax {
            line: self.line(),
            message: format!("unexpected end of file, expected {what}"),
        })?;
        self.at += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.at).map(|t| t.1)
    }

    fn expect(&mut self, word: &str) -> Result<usize, BvhError> {
        let (line, tok) = self.next(word)?;
        if tok != word {
            return Err(BvhError::Syntax {
                line,
                message: format!("expected `{word}`, found `{tok}`"),
            });
        }
        Ok(line)
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        let (line, tok) = self.next("a number")?;
        tok.parse().map_err(|_| BvhError::Number {
            line,
            token: tok.to_string(),
        })
    }

    fn count(&mut self) -> Result<usize, BvhError> {
        let (line, tok) = self.next("a count")?;
        tok.parse().map_err(|_| BvhError::Number {
            line,
            token: tok.to_string(),
        })
    }
}

/// Parses hierarchy and motion. Channel values become local rotations by
/// composing the per-axis rotations in the order the file lists them.
pub fn parse_bvh(text: &str) -> Result<(Skeleton, MotionClip), BvhError> {
    let mut t = Tokens::new(text);
    t.expect("HIERARCHY")?;
    t.expect("ROOT")?;
    let mut joints = Vec::new();
    let mut channels: Vec<Vec<Channel>> = Vec::new();
    parse_joint(&mut t, None, &mut joints, &mut channels)?;
    let motion_line = t.expect("MOTION")?;
    t.expect("Frames:")?;
    let declared = t.count()?;
    t.expect("Frame")?;
    t.expect("Time:")?;
    let frame_time = t.number()?;
    if !(frame_time > 0.0) {
        return Err(BvhError::Syntax {
            line: t.items[t.at - 1].0,
            message: format!("frame time {frame_time} must be positive"),
        });
    }
    let skeleton = Skeleton::new(joints).map_err(|e| BvhError::Syntax {
        line: motion_line,
        message: e.to_string(),
    })?;
    let expected: usize = channels.iter().map(Vec::len).sum();

    // motion rows are whole lines
    let header_end = t.items.get(t.at - 1).map_or(0, |x| x.0);
    let rows: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .skip(header_end)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| (n + 1, l))
        .collect();
    if rows.len() != declared {
        return Err(BvhError::FrameCount {
            line: rows.get(declared).or(rows.last()).map_or(header_end, |r| r.0),
            declared,
            found: rows.len(),
        });
    }
    let mut frames = Vec::with_capacity(declared);
    for (line, row) in rows {
        let values = row
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| BvhError::Number {
                    line,
                    token: tok.to_string(),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != expected {
            return Err(BvhError::ChannelCount {
                line,
                expected,
                found: values.len(),
            });
        }
        let mut pose = skeleton.rest_pose();
        let mut k = 0;
        for (j, chans) in channels.iter().enumerate() {
            let mut q = UnitQuaternion::identity();
            for c in chans {
                let v = values[k];
                k += 1;
                match *c {
                    Channel::Rot(axis) => q *= axis_rotation(axis, v.to_radians()),
                    Channel::Pos(axis) if j == 0 => pose.root_translation[axis] = v,
                    Channel::Pos(_) => {}
                }
            }
            if chans.iter().any(|c| matches!(c, Channel::Rot(_))) {
                pose.rotations[j] = q;
            }
        }
        frames.push(pose);
    }
    Ok((skeleton, MotionClip { frame_time, frames }))
}

fn parse_joint(
    t: &mut Tokens,
    parent: Option<usize>,
    joints: &mut Vec<Joint>,
    channels: &mut Vec<Vec<Channel>>,
) -> Result<(), BvhError> {
    let (_, name) = t.next("a joint name")?;
    t.expect("{")?;
    t.expect("OFFSET")?;
    let offset = Vec3::new(t.number()?, t.number()?, t.number()?);
    let mut chans = Vec::new();
    if t.peek() == Some("CHANNELS") {
        t.next("CHANNELS")?;
        let n = t.count()?;
        for _ in 0..n {
            let (line, c) = t.next("a channel name")?;
            chans.push(Channel::parse(c).ok_or_else(|| BvhError::UnknownChannel {
                line,
                name: c.to_string(),
            })?);
        }
    }
    let index = joints.len();
    joints.push(Joint {
        name: name.to_string(),
        parent,
        rotation: UnitQuaternion::identity(),
        translation: offset,
    });
    channels.push(chans);
    loop {
        let (line, tok) = t.next("`}`")?;
        match tok {
            "}" => return Ok(()),
            "JOINT" => parse_joint(t, Some(index), joints, channels)?,
            "End" => {
                t.expect("Site")?;
                t.expect("{")?;
                t.expect("OFFSET")?;
                for _ in 0..3 {
                    t.number()?;
                }
                t.expect("}")?;
            }
            other => {
                return Err(BvhError::Syntax {
                    line,
                    message: format!("unexpected `{other}` in joint `{name}`"),
                })
            }
        }
    }
}

fn axis_rotation(axis: usize, angle: f64) -> UnitQuaternion<f64> {
    let a = match axis {
        0 => Vector3::x_axis(),
        1 => Vector3::y_axis(),
        _ => Vector3::z_axis(),
    };
    UnitQuaternion::from_axis_angle(&a, angle)
}

/// `(z, x, y)` angles in degrees with `q = Rz * Rx * Ry`.
pub fn to_zxy_degrees(q: &UnitQuaternion<f64>) -> [f64; 3] {
    let r: Matrix3<f64> = *q.to_rotation_matrix().matrix();
    let sx = r[(2, 1)].clamp(-1.0, 1.0);
    let x = sx.asin();
    let (z, y) = if x.cos() > 1e-9 {
        ((-r[(0, 1)]).atan2(r[(1, 1)]), (-r[(2, 0)]).atan2(r[(2, 2)]))
    } else {
        (r[(1, 0)].atan2(r[(0, 0)]), 0.0)
    };
    [z.to_degrees(), x.to_degrees(), y.to_degrees()]
}

/// Writes the skeleton (root with position and ZXY rotation channels,
/// other joints with ZXY rotations) and every frame.
pub fn serialize_bvh(skeleton: &Skeleton, motion: &MotionClip) -> Result<String, BvhError> {
    for j in skeleton.joints() {
        if j.rotation.angle() > 1e-12 {
            return Err(BvhError::RestRotation(j.name.clone()));
        }
    }
    let mut s = String::from("HIERARCHY\n");
    write_joint(&mut s, skeleton, 0, 0);
    s.push_str("MOTION\n");
    let _ = writeln!(s, "Frames: {}", motion.frames.len());
    let _ = writeln!(s, "Frame Time: {}", motion.frame_time);
    for f in &motion.frames {
        let mut vals: Vec<f64> = f.root_translation.iter().copied().collect();
        for q in &f.rotations {
            vals.extend(to_zxy_degrees(q));
        }
        let row: Vec<String> = vals.iter().map(|v| format!("{v}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    Ok(s)
}

fn write_joint(s: &mut String, sk: &Skeleton, i: usize, depth: usize) {
    let pad = "\t".repeat(depth);
    let j = &sk.joints()[i];
    let kind = if i == 0 { "ROOT" } else { "JOINT" };
    let _ = writeln!(s, "{pad}{kind} {}", j.name);
    let _ = writeln!(s, "{pad}{{");
    let o = j.translation;
    let _ = writeln!(s, "{pad}\tOFFSET {} {} {}", o.x, o.y, o.z);
    if i == 0 {
        let _ = writeln!(s, "{pad}\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation");
    } else {
        let _ = writeln!(s, "{pad}\tCHANNELS 3 Zrotation Xrotation Yrotation");
    }
    let mut leaf = true;
    for c in sk.children(i) {
        leaf = false;
        write_joint(s, sk, c, depth + 1);
    }
    if leaf {
        let _ = writeln!(s, "{pad}\tEnd Site\n{pad}\t{{\n{pad}\t\tOFFSET 0 0 0\n{pad}\t}}");
    }
    let _ = writeln!(s, "{pad}}}");
}

/// Rotation for `(z, x, y)` degrees, inverse of [`to_zxy_degrees`].
pub fn from_zxy_degrees(a: [f64; 3]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(
        &(Rotation3::from_axis_angle(&Vector3::z_axis(), a[0].to_radians())
            * Rotation3::from_axis_angle(&Vector3::x_axis(), a[1].to_radians())
            * Rotation3::from_axis_angle(&Vector3::y_axis(), a[2].to_radians())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TWO: &str = "HIERARCHY
ROOT hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT spine
  {
    OFFSET 0 1.5 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 1 0
    }
  }
}
MOTION
Frames: 3
Frame Time: 0.04
0 1 0 0 0 0 0 0 0
0.5 1 0 90 0 0 0 0 0
1 1 0 0 0 0 0 45 0
";

    #[test]
    fn parses_fixture_values() {
        let (s, m) = parse_bvh(TWO).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.joints()[1].translation, Vec3::new(0.0, 1.5, 0.0));
        assert_eq!(m.frames.len(), 3);
        assert!((m.frame_rate() - 25.0).abs() < 1e-9);
        assert_eq!(m.frames[0].rotations[0], UnitQuaternion::identity());
        assert_eq!(m.frames[1].root_translation, Vec3::new(0.5, 1.0, 0.0));
        let z90 = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        assert!(m.frames[1].rotations[0].angle_to(&z90) < 1e-12);
        let x45 = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_4);
        assert!(m.frames[2].rotations[1].angle_to(&x45) < 1e-12);
    }

    #[test]
    fn errors_name_lines() {
        let extra = TWO.replace("Frames: 3", "Frames: 2");
        assert!(matches!(
            parse_bvh(&extra),
            Err(BvhError::FrameCount { declared: 2, found: 3, .. })
        ));
        let short = TWO.replace("0.5 1 0 90 0 0 0 0 0", "0.5 1 0 90 0 0 0 0");
        assert_eq!(
            parse_bvh(&short),
            Err(BvhError::ChannelCount {
                line: 20,
                expected: 9,
                found: 8
            })
        );
        let bad = TWO.replace("Zrotation Xrotation Yrotation\n    End", "Zrotation Xrotation Wrotation\n    End");
        assert_eq!(
            parse_bvh(&bad),
            Err(BvhError::UnknownChannel {
                line: 9,
                name: "Wrotation".into()
            })
        );
        assert!(matches!(parse_bvh("HIERARCHY\nROOT a\n{"), Err(BvhError::Syntax { line: 3, .. })));
    }

    #[test]
    fn round_trip() {
        let (s, m) = parse_bvh(TWO).unwrap();
        let (s2, m2) = parse_bvh(&serialize_bvh(&s, &m).unwrap()).unwrap();
        assert_eq!(s, s2);
        for (a, b) in m.frames.iter().zip(&m2.frames) {
            assert!((a.root_translation - b.root_translation).norm() < 1e-9);
            for (p, q) in a.rotations.iter().zip(&b.rotations) {
                assert!(p.angle_to(q) < 1e-9);
            }
        }
        assert_eq!(m.frame_time, m2.frame_time);
    }

    proptest! {
        #[test]
        fn zxy_decomposition_inverts(w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let n = (w * w + x * x + y * y + z * z).sqrt();
            prop_assume!(n > 1e-3);
            let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
            let back = from_zxy_degrees(to_zxy_degrees(&q));
            prop_assert!(q.angle_to(&back) < 1e-7);
        }
    }
}
