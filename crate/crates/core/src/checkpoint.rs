//! Binary checkpoints: magic `AUGDFA1`, model kind, seed, epoch and a list
//! of named row-major tensors stored as little-endian f64.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::ffnet::FeedforwardNet;
use crate::numerics::{CMatrix, Matrix};
use crate::reservoir::DeepReservoir;
use crate::scalar::Real;
use crate::unitary::UnitaryNet;

pub const MAGIC: &[u8; 7] = b"AUGDFA1";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }

    fn from_matrix<T: Real>(name: String, m: &Matrix<T>) -> Self {
        Self {
            name,
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    fn from_vec<T: Real>(name: String, v: &[T]) -> Self {
        Self {
            name,
            shape: vec![v.len()],
            data: v.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }

    fn to_matrix<T: Real>(&self) -> Result<Matrix<T>> {
        match self.shape[..] {
            [r, c] => Matrix::new(r, c, self.data.iter().map(|&v| T::lit(v)).collect()),
            _ => Err(Error::Checkpoint(format!("tensor {} is not a matrix", self.name))),
        }
    }

    fn to_vec<T: Real>(&self) -> Vec<T> {
        self.data.iter().map(|&v| T::lit(v)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub seed: u64,
    pub epoch: u64,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!("expected a {kind} checkpoint, found {}", self.kind)));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_str(&mut out, &self.kind);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_str(&mut out, &t.name);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("bad magic header".into()));
        }
        let kind = r.string()?;
        let seed = r.u64()?;
        let epoch = r.u64()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= (bytes.len() - r.pos) / 8)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} is larger than the file")))?;
            let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            tensors.push(Tensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { kind, seed, epoch, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid utf-8 name".into()))
    }
}

fn complex_tensors<T: Real>(prefix: &str, m: &CMatrix<T>) -> [Tensor; 2] {
    let shape = vec![m.rows(), m.cols()];
    [
        Tensor {
            name: format!("{prefix}.re"),
            shape: shape.clone(),
            data: m.as_slice().iter().map(|c| c.re.to_f64_lossy()).collect(),
        },
        Tensor {
            name: format!("{prefix}.im"),
            shape,
            data: m.as_slice().iter().map(|c| c.im.to_f64_lossy()).collect(),
        },
    ]
}

fn complex_from<T: Real>(ck: &Checkpoint, prefix: &str) -> Result<CMatrix<T>> {
    let re = ck.get(&format!("{prefix}.re"))?;
    let im = ck.get(&format!("{prefix}.im"))?;
    if re.shape.len() != 2 || re.shape != im.shape {
        return Err(Error::Checkpoint(format!("{prefix}: bad complex shape")));
    }
    let data = re.data.iter().zip(&im.data).map(|(&a, &b)| Complex::new(T::lit(a), T::lit(b))).collect();
    CMatrix::new(re.shape[0], re.shape[1], data)
}

fn check_shape(name: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(Error::Checkpoint(format!("{name}: stored {got:?}, model has {want:?}")));
    }
    Ok(())
}

pub fn ffnet_checkpoint<T: Real>(net: &FeedforwardNet<T>, seed: u64, epoch: u64) -> Checkpoint {
    let mut tensors = Vec::new();
    for (l, layer) in net.layers.iter().enumerate() {
        tensors.push(Tensor::from_matrix(format!("layer{l}.w"), &layer.w));
        tensors.push(Tensor::from_vec(format!("layer{l}.bias"), &layer.bias));
    }
    for (l, b) in net.feedback.iter().enumerate() {
        tensors.push(Tensor::from_matrix(format!("feedback{l}"), b));
    }
    Checkpoint {
        kind: "ffnet".into(),
        seed,
        epoch,
        tensors,
    }
}

/// Loads weights into a net of matching architecture.
pub fn restore_ffnet<T: Real>(net: &mut FeedforwardNet<T>, ck: &Checkpoint) -> Result<()> {
    ck.expect_kind("ffnet")?;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let w = ck.get(&format!("layer{l}.w"))?.to_matrix()?;
        check_shape("w", w.shape(), layer.w.shape())?;
        let bias = ck.get(&format!("layer{l}.bias"))?.to_vec();
        check_shape("bias", (bias.len(), 1), (layer.bias.len(), 1))?;
        layer.w = w;
        layer.bias = bias;
    }
    for (l, b) in net.feedback.iter_mut().enumerate() {
        let m = ck.get(&format!("feedback{l}"))?.to_matrix()?;
        check_shape("feedback", m.shape(), b.shape())?;
        *b = m;
    }
    Ok(())
}

pub fn reservoir_checkpoint<T: Real>(res: &DeepReservoir<T>, seed: u64, epoch: u64) -> Checkpoint {
    let mut tensors = Vec::new();
    for (l, layer) in res.layers.iter().enumerate() {
        tensors.push(Tensor::from_matrix(format!("layer{l}.mask"), &layer.mask));
        tensors.push(Tensor::from_vec(
            format!("layer{l}.params"),
            &[layer.alpha, layer.phi_bias, layer.phi_alt],
        ));
        tensors.push(Tensor::from_matrix(format!("feedback{l}"), &res.feedback[l]));
    }
    tensors.push(Tensor::from_matrix("readout".into(), &res.readout));
    Checkpoint {
        kind: "reservoir".into(),
        seed,
        epoch,
        tensors,
    }
}

pub fn restore_reservoir<T: Real>(res: &mut DeepReservoir<T>, ck: &Checkpoint) -> Result<()> {
    ck.expect_kind("reservoir")?;
    for (l, layer) in res.layers.iter_mut().enumerate() {
        let mask = ck.get(&format!("layer{l}.mask"))?.to_matrix()?;
        check_shape("mask", mask.shape(), layer.mask.shape())?;
        let p: Vec<f64> = ck.get(&format!("layer{l}.params"))?.data.clone();
        if p.len() != 3 {
            return Err(Error::Checkpoint(format!("layer{l}.params needs 3 values")));
        }
        layer.mask = mask;
        layer.alpha = p[0];
        layer.phi_bias = p[1];
        layer.phi_alt = p[2];
        let b = ck.get(&format!("feedback{l}"))?.to_matrix()?;
        check_shape("feedback", b.shape(), res.feedback[l].shape())?;
        res.feedback[l] = b;
    }
    let w = ck.get("readout")?.to_matrix()?;
    check_shape("readout", w.shape(), res.readout.shape())?;
    res.readout = w;
    Ok(())
}

pub fn unitary_checkpoint<T: Real>(net: &UnitaryNet<T>, seed: u64, epoch: u64) -> Checkpoint {
    let mut tensors = Vec::new();
    for (l, layer) in net.layers.iter().enumerate() {
        let theta: Vec<T> = layer.phases.iter().map(|p| p.theta).collect();
        let phi: Vec<T> = layer.phases.iter().map(|p| p.phi).collect();
        tensors.push(Tensor::from_vec(format!("layer{l}.theta"), &theta));
        tensors.push(Tensor::from_vec(format!("layer{l}.phi"), &phi));
        tensors.push(Tensor::from_vec(format!("layer{l}.d"), &layer.d_phases));
        tensors.extend(complex_tensors(&format!("feedback{l}"), &net.feedback[l]));
    }
    tensors.push(Tensor::from_matrix("readout".into(), &net.readout));
    tensors.push(Tensor::from_vec("readout_bias".into(), &net.readout_bias));
    Checkpoint {
        kind: "unitary".into(),
        seed,
        epoch,
        tensors,
    }
}

pub fn restore_unitary<T: Real>(net: &mut UnitaryNet<T>, ck: &Checkpoint) -> Result<()> {
    ck.expect_kind("unitary")?;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let theta: Vec<T> = ck.get(&format!("layer{l}.theta"))?.to_vec();
        let phi: Vec<T> = ck.get(&format!("layer{l}.phi"))?.to_vec();
        let d: Vec<T> = ck.get(&format!("layer{l}.d"))?.to_vec();
        if theta.len() != layer.phases.len() || phi.len() != layer.phases.len() || d.len() != layer.n_ports {
            return Err(Error::Checkpoint(format!("layer{l}: phase count mismatch")));
        }
        for ((p, t), f) in layer.phases.iter_mut().zip(theta).zip(phi) {
            p.theta = t;
            p.phi = f;
        }
        layer.d_phases = d;
        let b = complex_from(ck, &format!("feedback{l}"))?;
        check_shape("feedback", b.shape(), net.feedback[l].shape())?;
        net.feedback[l] = b;
    }
    let w = ck.get("readout")?.to_matrix()?;
    check_shape("readout", w.shape(), net.readout.shape())?;
    net.readout = w;
    let bias = ck.get("readout_bias")?.to_vec();
    check_shape("readout_bias", (bias.len(), 1), (net.readout_bias.len(), 1))?;
    net.readout_bias = bias;
    Ok(())
}
