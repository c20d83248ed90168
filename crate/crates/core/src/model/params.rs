use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Parameter groups; weight decay skips batch-norm scale and shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Scale,
    Shift,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight | ParamKind::Bias)
    }
}

/// Affine map `x W + b` with `W` stored as `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    /// He-normal weights, zero bias.
    pub fn he_normal<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        Self {
            weight: Array2::from_shape_simple_fn((fan_in, fan_out), || normal.sample(rng)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Learnable per-feature scale and shift of a batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
}

impl BatchNorm {
    pub fn identity(width: usize) -> Self {
        Self {
            scale: Array1::ones(width),
            shift: Array1::zeros(width),
        }
    }

    pub fn zeros(width: usize) -> Self {
        Self {
            scale: Array1::zeros(width),
            shift: Array1::zeros(width),
        }
    }
}

/// `relu(x + bn2(fc2(relu(bn1(fc1(x))))))`
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub fc1: Linear,
    pub bn1: BatchNorm,
    pub fc2: Linear,
    pub bn2: BatchNorm,
}

/// Every learnable tensor of the network. Gradients and optimizer moments
/// share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub input: Linear,
    pub blocks: Vec<ResidualBlock>,
    pub head: Linear,
}

pub struct Tensor<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: (usize, usize),
    pub values: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: (usize, usize),
    pub values: &'a mut [f64],
}

fn mat(name: String, kind: ParamKind, a: &Array2<f64>) -> Tensor<'_> {
    Tensor {
        name,
        kind,
        shape: a.dim(),
        values: a.as_slice().expect("standard layout"),
    }
}

fn vec1(name: String, kind: ParamKind, a: &Array1<f64>) -> Tensor<'_> {
    Tensor {
        name,
        kind,
        shape: (1, a.len()),
        values: a.as_slice().expect("standard layout"),
    }
}

fn mat_mut(name: String, kind: ParamKind, a: &mut Array2<f64>) -> TensorMut<'_> {
    TensorMut {
        name,
        kind,
        shape: a.dim(),
        values: a.as_slice_mut().expect("standard layout"),
    }
}

fn vec1_mut(name: String, kind: ParamKind, a: &mut Array1<f64>) -> TensorMut<'_> {
    TensorMut {
        name,
        kind,
        shape: (1, a.len()),
        values: a.as_slice_mut().expect("standard layout"),
    }
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        let lin = |l: &Linear| Linear::zeros(l.weight.nrows(), l.weight.ncols());
        Self {
            input: lin(&self.input),
            blocks: self
                .blocks
                .iter()
                .map(|b| ResidualBlock {
                    fc1: lin(&b.fc1),
                    bn1: BatchNorm::zeros(b.bn1.scale.len()),
                    fc2: lin(&b.fc2),
                    bn2: BatchNorm::zeros(b.bn2.scale.len()),
                })
                .collect(),
            head: lin(&self.head),
        }
    }

    /// Tensors in canonical order (the checkpoint order).
    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        use ParamKind::*;
        let mut out = vec![
            mat("input.weight".into(), Weight, &self.input.weight),
            vec1("input.bias".into(), Bias, &self.input.bias),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push(mat(format!("blocks.{i}.fc1.weight"), Weight, &b.fc1.weight));
            out.push(vec1(format!("blocks.{i}.fc1.bias"), Bias, &b.fc1.bias));
            out.push(vec1(format!("blocks.{i}.bn1.scale"), Scale, &b.bn1.scale));
            out.push(vec1(format!("blocks.{i}.bn1.shift"), Shift, &b.bn1.shift));
            out.push(mat(format!("blocks.{i}.fc2.weight"), Weight, &b.fc2.weight));
            out.push(vec1(format!("blocks.{i}.fc2.bias"), Bias, &b.fc2.bias));
            out.push(vec1(format!("blocks.{i}.bn2.scale"), Scale, &b.bn2.scale));
            out.push(vec1(format!("blocks.{i}.bn2.shift"), Shift, &b.bn2.shift));
        }
        out.push(mat("head.weight".into(), Weight, &self.head.weight));
        out.push(vec1("head.bias".into(), Bias, &self.head.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        use ParamKind::*;
        let mut out = vec![
            mat_mut("input.weight".into(), Weight, &mut self.input.weight),
            vec1_mut("input.bias".into(), Bias, &mut self.input.bias),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push(mat_mut(
                format!("blocks.{i}.fc1.weight"),
                Weight,
                &mut b.fc1.weight,
            ));
            out.push(vec1_mut(
                format!("blocks.{i}.fc1.bias"),
                Bias,
                &mut b.fc1.bias,
            ));
            out.push(vec1_mut(
                format!("blocks.{i}.bn1.scale"),
                Scale,
                &mut b.bn1.scale,
            ));
            out.push(vec1_mut(
                format!("blocks.{i}.bn1.shift"),
                Shift,
                &mut b.bn1.shift,
            ));
            out.push(mat_mut(
                format!("blocks.{i}.fc2.weight"),
                Weight,
                &mut b.fc2.weight,
            ));
            out.push(vec1_mut(
                format!("blocks.{i}.fc2.bias"),
                Bias,
                &mut b.fc2.bias,
            ));
            out.push(vec1_mut(
                format!("blocks.{i}.bn2.scale"),
                Scale,
                &mut b.bn2.scale,
            ));
            out.push(vec1_mut(
                format!("blocks.{i}.bn2.shift"),
                Shift,
                &mut b.bn2.shift,
            ));
        }
        out.push(mat_mut("head.weight".into(), Weight, &mut self.head.weight));
        out.push(vec1_mut("head.bias".into(), Bias, &mut self.head.bias));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.values.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for t in self.tensors() {
            out.extend_from_slice(t.values);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.values.iter().all(|v| v.is_finite()))
    }
}
