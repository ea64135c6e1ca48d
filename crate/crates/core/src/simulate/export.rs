//! Trajectory export: CSV for hand-off, little-endian binary for lossless
//! round trips.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::model::ModeLabel;

use super::{EnergyLedger, Trajectory};

const MAGIC: &[u8; 4] = b"LVTJ";
const VERSION: u32 = 1;

/// Writes every `stride`-th sample as CSV with header
/// `t_s,x_m_<label>...,v_mps_<label>...,det_m,ffb_n_<label>...`.
pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    let mut header = vec!["t_s".to_string()];
    header.extend(traj.labels.iter().map(|l| format!("x_m_{l}")));
    header.extend(traj.labels.iter().map(|l| format!("v_mps_{l}")));
    header.push("det_m".into());
    header.extend(traj.feedback_labels.iter().map(|l| format!("ffb_n_{l}")));
    writeln!(out, "{}", header.join(","))?;

    let mut line = String::new();
    for i in (0..traj.len()).step_by(stride) {
        line.clear();
        push_value(&mut line, traj.t[i]);
        for x in &traj.x {
            line.push(',');
            push_value(&mut line, x[i]);
        }
        for v in &traj.v {
            line.push(',');
            push_value(&mut line, v[i]);
        }
        line.push(',');
        push_value(&mut line, traj.detector[i]);
        for f in &traj.feedback_force {
            line.push(',');
            push_value(&mut line, f[i]);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn push_value(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    let _ = write!(line, "{v:e}");
}

fn put_f64s<W: Write>(out: &mut W, values: &[f64]) -> io::Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn put_labels<W: Write>(out: &mut W, labels: &[ModeLabel]) -> io::Result<()> {
    out.write_all(&(labels.len() as u32).to_le_bytes())?;
    for l in labels {
        let s = l.as_str().as_bytes();
        out.write_all(&[s.len() as u8])?;
        out.write_all(s)?;
    }
    Ok(())
}

/// Lossless binary dump of a trajectory (all samples, energy ledgers included).
pub fn write_binary<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&traj.dt.to_le_bytes())?;
    out.write_all(&(traj.len() as u64).to_le_bytes())?;
    put_labels(&mut out, &traj.labels)?;
    put_labels(&mut out, &traj.feedback_labels)?;
    put_f64s(&mut out, &traj.t)?;
    for s in traj.x.iter().chain(&traj.v) {
        put_f64s(&mut out, s)?;
    }
    put_f64s(&mut out, &traj.detector)?;
    for s in &traj.feedback_force {
        put_f64s(&mut out, s)?;
    }
    for e in &traj.energy {
        put_f64s(
            &mut out,
            &[
                e.initial_energy,
                e.final_energy,
                e.feedback_work,
                e.disturbance_work,
                e.coupling_work,
                e.bath_exchange,
            ],
        )?;
    }
    Ok(())
}

fn bad(reason: &str) -> Error {
    Error::Io(io::Error::new(io::ErrorKind::InvalidData, reason.to_string()))
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn get_labels<R: Read>(r: &mut R) -> Result<Vec<ModeLabel>> {
    let n = get_u32(r)? as usize;
    (0..n)
        .map(|_| {
            let mut len = [0u8; 1];
            r.read_exact(&mut len)?;
            let mut s = vec![0u8; len[0] as usize];
            r.read_exact(&mut s)?;
            std::str::from_utf8(&s).map_err(|_| bad("label is not UTF-8"))?.parse()
        })
        .collect()
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Trajectory> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a trajectory file"));
    }
    if get_u32(&mut input)? != VERSION {
        return Err(bad("unsupported trajectory version"));
    }
    let dt = f64::from_le_bytes(get_u64(&mut input)?.to_le_bytes());
    let len = get_u64(&mut input)? as usize;
    let labels = get_labels(&mut input)?;
    let feedback_labels = get_labels(&mut input)?;
    let t = get_f64s(&mut input, len)?;
    let x = (0..labels.len()).map(|_| get_f64s(&mut input, len)).collect::<Result<_>>()?;
    let v = (0..labels.len()).map(|_| get_f64s(&mut input, len)).collect::<Result<_>>()?;
    let detector = get_f64s(&mut input, len)?;
    let feedback_force = (0..feedback_labels.len())
        .map(|_| get_f64s(&mut input, len))
        .collect::<Result<_>>()?;
    let energy = (0..labels.len())
        .map(|_| {
            let e = get_f64s(&mut input, 6)?;
            Ok(EnergyLedger {
                initial_energy: e[0],
                final_energy: e[1],
                feedback_work: e[2],
                disturbance_work: e[3],
                coupling_work: e[4],
                bath_exchange: e[5],
            })
        })
        .collect::<Result<_>>()?;
    Ok(Trajectory {
        dt,
        labels,
        t,
        x,
        v,
        detector,
        feedback_labels,
        feedback_force,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traj(values: Vec<f64>) -> Trajectory {
        let n = values.len();
        Trajectory {
            dt: 1e-3,
            labels: vec![ModeLabel::Y, ModeLabel::X],
            t: (0..n).map(|i| i as f64 * 1e-3).collect(),
            x: vec![values.clone(), values.iter().map(|v| -v).collect()],
            v: vec![values.iter().map(|v| v * 2.0).collect(), values.clone()],
            detector: values.clone(),
            feedback_labels: vec![ModeLabel::Y],
            feedback_force: vec![values.iter().map(|v| v * 1e-9).collect()],
            energy: vec![EnergyLedger::default(); 2],
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let mut buf = Vec::new();
        write_csv(&traj(vec![1.0, 2.0, 3.0]), &mut buf, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t_s,x_m_y,x_m_x,v_mps_y,v_mps_x,det_m,ffb_n_y");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("2e-3,3e0,-3e0,6e0,3e0,3e0,"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_binary(&b"NOPE0000"[..]).is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..64)) {
            let t = traj(values);
            let mut buf = Vec::new();
            write_binary(&t, &mut buf).unwrap();
            let back = read_binary(buf.as_slice()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
