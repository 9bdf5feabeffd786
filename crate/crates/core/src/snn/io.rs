//! Versioned binary parameter container.
//!
//! Layout (little-endian):
//!   magic "SNNP" | format version u32 | spec hash u64 | tensor count u32
//! then per tensor:
//!   name length u32 | name bytes | ndim u32 | dims u32 each | data f32...
//!
//! Loading validates the whole file before constructing anything, so a
//! corrupted file never yields partial state.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::params::{ParamTensor, Parameters};
use super::{Result, SnnError};

pub const PARAMS_FILE_MAGIC: &[u8; 4] = b"SNNP";
pub const PARAMS_FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> SnnError {
    SnnError::Io { path: path.to_path_buf(), source }
}

pub fn save_params(params: &Parameters, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        w.write_all(PARAMS_FILE_MAGIC)?;
        w.write_u32::<LittleEndian>(PARAMS_FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(params.spec_hash)?;
        w.write_u32::<LittleEndian>(params.tensors.len() as u32)?;
        for t in &params.tensors {
            w.write_u32::<LittleEndian>(t.name.len() as u32)?;
            w.write_all(t.name.as_bytes())?;
            w.write_u32::<LittleEndian>(t.shape.len() as u32)?;
            for &d in &t.shape {
                w.write_u32::<LittleEndian>(d as u32)?;
            }
            for &v in &t.data {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

/// Load a parameter file. The caller checks the spec hash against its plan
/// via [`Parameters::matches`]; `expected_hash` here rejects obviously
/// incompatible files early when provided.
pub fn load_params(path: &Path, expected_hash: Option<u64>) -> Result<Parameters> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| SnnError::Format("missing magic".into()))?;
    if &magic != PARAMS_FILE_MAGIC {
        return Err(SnnError::Format(format!("bad magic {magic:02x?}")));
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| SnnError::Format("missing format version".into()))?;
    if version != PARAMS_FORMAT_VERSION {
        return Err(SnnError::Format(format!("unsupported format version {version}")));
    }
    let spec_hash =
        r.read_u64::<LittleEndian>().map_err(|_| SnnError::Format("missing spec hash".into()))?;
    if let Some(expected) = expected_hash {
        if spec_hash != expected {
            return Err(SnnError::IncompatibleModel { found: spec_hash, expected });
        }
    }
    let count = r
        .read_u32::<LittleEndian>()
        .map_err(|_| SnnError::Format("missing tensor count".into()))?;
    if count > 4096 {
        return Err(SnnError::Format(format!("implausible tensor count {count}")));
    }

    let mut tensors = Vec::with_capacity(count as usize);
    for ti in 0..count {
        let name_len = r
            .read_u32::<LittleEndian>()
            .map_err(|_| SnnError::Format(format!("tensor {ti}: missing name length")))?;
        if name_len > 1024 {
            return Err(SnnError::Format(format!("tensor {ti}: name too long")));
        }
        let mut name = vec![0u8; name_len as usize];
        r.read_exact(&mut name)
            .map_err(|_| SnnError::Format(format!("tensor {ti}: truncated name")))?;
        let name = String::from_utf8(name)
            .map_err(|_| SnnError::Format(format!("tensor {ti}: name not utf-8")))?;
        let ndim = r
            .read_u32::<LittleEndian>()
            .map_err(|_| SnnError::Format(format!("tensor {ti}: missing ndim")))?;
        if ndim > 8 {
            return Err(SnnError::Format(format!("tensor {ti}: implausible ndim {ndim}")));
        }
        let mut shape = Vec::with_capacity(ndim as usize);
        let mut len = 1usize;
        for d in 0..ndim {
            let dim = r
                .read_u32::<LittleEndian>()
                .map_err(|_| SnnError::Format(format!("tensor {ti}: truncated dim {d}")))?;
            len = len.saturating_mul(dim as usize);
            shape.push(dim as usize);
        }
        if len > 1 << 28 {
            return Err(SnnError::Format(format!("tensor {ti}: implausible size {len}")));
        }
        let mut data = Vec::with_capacity(len);
        for i in 0..len {
            let v = r
                .read_f32::<LittleEndian>()
                .map_err(|_| SnnError::Format(format!("tensor {ti}: truncated at value {i}")))?;
            data.push(v);
        }
        tensors.push(ParamTensor { name, shape, data });
    }

    // Anything after the declared tensors is corruption.
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => return Err(SnnError::Format("trailing bytes after tensors".into())),
        Err(e) => return Err(io_err(path, e)),
    }

    Ok(Parameters { spec_hash, tensors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{compile, NetworkSpec, Parameters};
    use tempfile::tempdir;

    #[test]
    fn roundtrip_is_bitwise() {
        let plan = compile(&NetworkSpec::default_arch(10, 1, 10)).unwrap();
        let params = Parameters::init(&plan, 5);
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.snnp");
        save_params(&params, &path).unwrap();
        let loaded = load_params(&path, Some(plan.spec_hash)).unwrap();
        assert_eq!(loaded, params);
    }

    #[test]
    fn wrong_spec_hash_rejected() {
        let plan = compile(&NetworkSpec::default_arch(10, 1, 10)).unwrap();
        let params = Parameters::init(&plan, 5);
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.snnp");
        save_params(&params, &path).unwrap();
        match load_params(&path, Some(plan.spec_hash ^ 1)) {
            Err(SnnError::IncompatibleModel { .. }) => {}
            other => panic!("expected incompatible model, got {other:?}"),
        }
    }

    #[test]
    fn truncations_error_cleanly() {
        let plan = compile(&NetworkSpec::default_arch(10, 1, 4)).unwrap();
        let params = Parameters::init(&plan, 5);
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.snnp");
        save_params(&params, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // Truncate at a spread of offsets, including inside the header.
        for cut in [0usize, 3, 4, 7, 11, 15, 16, 21, 40, bytes.len() / 2, bytes.len() - 1] {
            let cut_path = dir.path().join("cut.snnp");
            std::fs::write(&cut_path, &bytes[..cut]).unwrap();
            match load_params(&cut_path, None) {
                Err(SnnError::Format(_)) => {}
                other => panic!("cut at {cut}: expected format error, got {other:?}"),
            }
        }
        // Trailing garbage is also rejected.
        let mut extended = bytes.clone();
        extended.push(0);
        let ext_path = dir.path().join("ext.snnp");
        std::fs::write(&ext_path, &extended).unwrap();
        assert!(matches!(load_params(&ext_path, None), Err(SnnError::Format(_))));
    }
}
