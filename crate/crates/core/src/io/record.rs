//! Binary trajectory record.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "QPLREC\0\0" | version u32 | params digest [32]
//! params JSON: len u32, bytes
//! seed u64 | dt f64 | n_steps u64 | decimation u32
//! dY0: n_steps × f64
//! jumps: count u64, then (step u64, channel u8) each
//! table: n_cols u32, names (len u32, utf-8), n_rows u64,
//!        steps n_rows × u64, times n_rows × f64, columns n_cols × n_rows × f64
//! trailer: SHA-256 of everything above
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::sde_physical::{JumpEvent, TrajectoryRecord};
use crate::table::DecimatedTable;

pub const MAGIC: &[u8; 8] = b"QPLREC\0\0";
pub const VERSION: u32 = 1;

pub fn encode_record(rec: &TrajectoryRecord, params: &SystemParams) -> Result<Vec<u8>> {
    if params.digest() != rec.params_digest {
        return Err(Error::Record("params do not match the record's digest".into()));
    }
    if rec.dy0.len() as u64 != rec.n_steps {
        return Err(Error::Record(format!(
            "record holds {} increments for {} steps",
            rec.dy0.len(),
            rec.n_steps
        )));
    }
    let json = serde_json::to_vec(params)?;
    let t = &rec.observables;
    let mut out = Vec::with_capacity(128 + json.len() + 8 * rec.dy0.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rec.params_digest);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&rec.seed.to_le_bytes());
    out.extend_from_slice(&rec.dt.to_le_bytes());
    out.extend_from_slice(&rec.n_steps.to_le_bytes());
    out.extend_from_slice(&rec.decimation.to_le_bytes());
    for x in &rec.dy0 {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&(rec.jumps.len() as u64).to_le_bytes());
    for j in &rec.jumps {
        out.extend_from_slice(&j.step.to_le_bytes());
        out.push(j.channel);
    }
    out.extend_from_slice(&(t.names().len() as u32).to_le_bytes());
    for name in t.names() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend_from_slice(&(t.len() as u64).to_le_bytes());
    for s in &t.steps {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for x in &t.times {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for (_, col) in t.columns() {
        for x in col {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Record(format!("truncated record at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// Length prefix checked against the bytes left, at `width` bytes per item.
    fn count(&mut self, n: u64, width: usize) -> Result<usize> {
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(width as u64) > left {
            return Err(Error::Record(format!("length {n} exceeds remaining data")));
        }
        Ok(n as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode_record(bytes: &[u8]) -> Result<(SystemParams, TrajectoryRecord)> {
    if bytes.len() < MAGIC.len() + 32 {
        return Err(Error::Record("file too short".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(Error::Record("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Record("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Record(format!("unsupported version {version}")));
    }
    let params_digest: [u8; 32] = r.array()?;
    let json_len = r.u32()? as u64;
    let json_len = r.count(json_len, 1)?;
    let params: SystemParams = serde_json::from_slice(r.take(json_len)?)
        .map_err(|e| Error::Record(format!("bad params block: {e}")))?;
    if params.digest() != params_digest {
        return Err(Error::Record("params digest mismatch".into()));
    }
    let seed = r.u64()?;
    let dt = r.f64()?;
    let n_steps = r.u64()?;
    let decimation = r.u32()?;
    let n = r.count(n_steps, 8)?;
    let dy0 = r.f64s(n)?;

    let n_jumps = r.u64()?;
    let n_jumps = r.count(n_jumps, 9)?;
    let mut jumps = Vec::with_capacity(n_jumps);
    for _ in 0..n_jumps {
        let step = r.u64()?;
        let channel = r.u8()?;
        if !(channel == 1 || channel == 2) || step >= n_steps {
            return Err(Error::Record(format!("bad jump event ({step}, {channel})")));
        }
        jumps.push(JumpEvent { step, channel });
    }

    let n_cols = r.u32()? as u64;
    let n_cols = r.count(n_cols, 4)?;
    let mut names = Vec::with_capacity(n_cols);
    for _ in 0..n_cols {
        let len = r.u32()? as u64;
        let len = r.count(len, 1)?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Record("column name is not utf-8".into()))?;
        names.push(name.to_string());
    }
    let n_rows = r.u64()?;
    let n_rows = r.count(n_rows, 16 + 8 * n_cols)?;
    let steps: Vec<u64> = (0..n_rows).map(|_| r.u64()).collect::<Result<_>>()?;
    let times = r.f64s(n_rows)?;
    let columns: Vec<Vec<f64>> = (0..n_cols).map(|_| r.f64s(n_rows)).collect::<Result<_>>()?;
    if r.pos != body.len() {
        return Err(Error::Record("trailing bytes after table".into()));
    }

    let mut table = DecimatedTable::new(names);
    for i in 0..n_rows {
        let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
        table.push_row(steps[i], times[i], &row);
    }
    Ok((
        params,
        TrajectoryRecord {
            seed,
            params_digest,
            dt,
            n_steps,
            decimation,
            dy0,
            jumps,
            observables: table,
        },
    ))
}

pub fn write_record(path: &Path, rec: &TrajectoryRecord, params: &SystemParams) -> Result<()> {
    std::fs::write(path, encode_record(rec, params)?)?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<(SystemParams, TrajectoryRecord)> {
    decode_record(&std::fs::read(path)?)
}
