//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "NILMCKPT"
//! version      u32      = 1
//! width_scale  f64
//! adam_step    u64
//! count        u32      number of array records
//! record * count:
//!   role       u8       0 = parameter, 1 = batch-norm buffer, 2 = Adam m, 3 = Adam v
//!   name_len   u32
//!   name       name_len bytes, UTF-8
//!   ndim       u32
//!   dims       u64 * ndim
//!   data       f64 * prod(dims)
//! ```
//!
//! Records appear in order: parameters, buffers, Adam m, Adam v. Moment
//! records reuse the name and shape of their parameter.

use std::io::{Read, Write};
use std::path::Path;

use super::net::{Architecture, ModelParams, NamedArray};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"NILMCKPT";
pub const VERSION: u32 = 1;

const ROLE_PARAM: u8 = 0;
const ROLE_BUFFER: u8 = 1;
const ROLE_ADAM_M: u8 = 2;
const ROLE_ADAM_V: u8 = 3;

fn write_array<T: Scalar, W: Write>(
    w: &mut W,
    role: u8,
    name: &str,
    shape: &[usize],
    data: &[T],
) -> Result<()> {
    w.write_all(&[role])?;
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in data {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<T: Scalar, W: Write>(params: &ModelParams<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&params.arch.width_scale.to_le_bytes())?;
    w.write_all(&params.adam.step.to_le_bytes())?;
    let count = 3 * params.params.len() + params.buffers.len();
    w.write_all(&(count as u32).to_le_bytes())?;
    for p in &params.params {
        write_array(&mut w, ROLE_PARAM, &p.name, &p.shape, &p.data)?;
    }
    for b in &params.buffers {
        write_array(&mut w, ROLE_BUFFER, &b.name, &b.shape, &b.data)?;
    }
    for (p, m) in params.params.iter().zip(&params.adam.m) {
        write_array(&mut w, ROLE_ADAM_M, &p.name, &p.shape, m)?;
    }
    for (p, v) in params.params.iter().zip(&params.adam.v) {
        write_array(&mut w, ROLE_ADAM_V, &p.name, &p.shape, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(params, std::io::BufWriter::new(file))
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::input(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4, _>(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8, _>(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<8, _>(r)?))
}

struct Record<T> {
    role: u8,
    array: NamedArray<T>,
}

fn read_record<T: Scalar, R: Read>(r: &mut R) -> Result<Record<T>> {
    let [role] = read_exact::<1, _>(r)?;
    let name_len = read_u32(r)? as usize;
    if name_len > 4096 {
        return Err(Error::input("checkpoint record name too long"));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)
        .map_err(|e| Error::input(format!("truncated checkpoint: {e}")))?;
    let name = String::from_utf8(name).map_err(|_| Error::input("checkpoint name is not UTF-8"))?;
    let ndim = read_u32(r)? as usize;
    let shape = (0..ndim)
        .map(|_| read_u64(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| read_f64(r).map(T::lit))
        .collect::<Result<Vec<_>>>()?;
    Ok(Record {
        role,
        array: NamedArray { name, shape, data },
    })
}

/// Reads a checkpoint and checks it against the architecture implied by its width scale.
pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<ModelParams<T>> {
    if &read_exact::<8, _>(&mut r)? != MAGIC {
        return Err(Error::input("not a checkpoint file (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::input(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let width_scale = read_f64(&mut r)?;
    let step = read_u64(&mut r)?;
    let count = read_u32(&mut r)? as usize;
    let arch = Architecture::new(width_scale)?;
    let mut model = ModelParams::<T>::init(arch, 0);
    model.adam.step = step;
    let np = model.params.len();
    let nb = model.buffers.len();
    if count != 3 * np + nb {
        return Err(Error::input(format!(
            "checkpoint has {count} records, expected {}",
            3 * np + nb
        )));
    }
    let expect = |rec: &Record<T>, role: u8, slot: &NamedArray<T>| -> Result<()> {
        if rec.role != role || rec.array.name != slot.name || rec.array.shape != slot.shape {
            return Err(Error::input(format!(
                "checkpoint record '{}' (role {}) does not match expected '{}' {:?}",
                rec.array.name, rec.role, slot.name, slot.shape
            )));
        }
        Ok(())
    };
    for i in 0..np {
        let rec = read_record::<T, _>(&mut r)?;
        expect(&rec, ROLE_PARAM, &model.params[i])?;
        model.params[i] = rec.array;
    }
    for i in 0..nb {
        let rec = read_record::<T, _>(&mut r)?;
        expect(&rec, ROLE_BUFFER, &model.buffers[i])?;
        model.buffers[i] = rec.array;
    }
    for i in 0..np {
        let rec = read_record::<T, _>(&mut r)?;
        expect(&rec, ROLE_ADAM_M, &model.params[i])?;
        model.adam.m[i] = rec.array.data;
    }
    for i in 0..np {
        let rec = read_record::<T, _>(&mut r)?;
        expect(&rec, ROLE_ADAM_V, &model.params[i])?;
        model.adam.v[i] = rec.array.data;
    }
    Ok(model)
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelParams<T>> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
