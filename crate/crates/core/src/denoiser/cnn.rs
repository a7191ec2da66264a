//! Direct-convolution inference for the layer stack, plus the forward
//! and transposed derivatives used by the Jacobian estimator.

use std::sync::Arc;

use rayon::prelude::*;

use super::model::{Activation, DenoiserModel, ModelLayer};
use super::{Denoiser, DenoiserError, Differentiable, Linearization};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandleOptions {
    /// Randomise over the dihedral group at each application inside the
    /// solvers and the CLI.
    pub equivariant: bool,
    /// `D(x) = relu(x − R(x))` when set, `relu(R(x))` otherwise.
    pub residual_skip: bool,
    pub seed: u64,
}

/// A loaded model with its run-time options.
#[derive(Clone, Debug)]
pub struct DenoiserHandle {
    model: Arc<DenoiserModel>,
    options: HandleOptions,
}

/// Shifts a plane by `(dy, dx)` and accumulates `w · shifted` into `out`,
/// with zeros outside the image: `out[i, j] += w · src[i + dy, j + dx]`.
fn shifted_axpy(out: &mut [f64], src: &[f64], w: f64, h: usize, wd: usize, dy: isize, dx: isize) {
    let i0 = (-dy).max(0) as usize;
    let i1 = (h as isize - dy).min(h as isize).max(0) as usize;
    let j0 = (-dx).max(0) as usize;
    let j1 = (wd as isize - dx).min(wd as isize).max(0) as usize;
    if j0 >= j1 {
        return;
    }
    for i in i0..i1 {
        let si = (i as isize + dy) as usize;
        let o = &mut out[i * wd + j0..i * wd + j1];
        let s0 = (j0 as isize + dx) as usize;
        let s = &src[si * wd + s0..si * wd + s0 + (j1 - j0)];
        for (a, b) in o.iter_mut().zip(s) {
            *a += w * b;
        }
    }
}

/// Zero-padded stride-1 cross-correlation, optionally with bias.
fn conv(layer: &ModelLayer, input: &[f64], h: usize, w: usize, with_bias: bool) -> Vec<f64> {
    let s = layer.spec;
    let plane = h * w;
    let (ch, cw) = ((s.kh / 2) as isize, (s.kw / 2) as isize);
    let mut out = vec![0.0; s.out * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(o, dst)| {
        if with_bias {
            dst.iter_mut().for_each(|v| *v = layer.bias[o] as f64);
        }
        for c in 0..s.inp {
            let src = &input[c * plane..(c + 1) * plane];
            for a in 0..s.kh {
                for b in 0..s.kw {
                    let wt = layer.kernel[((o * s.inp + c) * s.kh + a) * s.kw + b] as f64;
                    if wt != 0.0 {
                        shifted_axpy(dst, src, wt, h, w, a as isize - ch, b as isize - cw);
                    }
                }
            }
        }
    });
    out
}

/// Adjoint of [`conv`] without bias.
fn conv_transpose(layer: &ModelLayer, grad: &[f64], h: usize, w: usize) -> Vec<f64> {
    let s = layer.spec;
    let plane = h * w;
    let (ch, cw) = ((s.kh / 2) as isize, (s.kw / 2) as isize);
    let mut out = vec![0.0; s.inp * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(c, dst)| {
        for o in 0..s.out {
            let src = &grad[o * plane..(o + 1) * plane];
            for a in 0..s.kh {
                for b in 0..s.kw {
                    let wt = layer.kernel[((o * s.inp + c) * s.kh + a) * s.kw + b] as f64;
                    if wt != 0.0 {
                        shifted_axpy(dst, src, wt, h, w, ch - a as isize, cw - b as isize);
                    }
                }
            }
        }
    });
    out
}

struct Trace {
    // relu masks per layer (None for linear layers)
    masks: Vec<Option<Vec<bool>>>,
    out_mask: Vec<bool>,
    kink: bool,
}

impl DenoiserHandle {
    pub fn new(model: DenoiserModel) -> Self {
        let residual_skip = model.residual_skip;
        DenoiserHandle {
            model: Arc::new(model),
            options: HandleOptions {
                equivariant: false,
                residual_skip,
                seed: 0,
            },
        }
    }

    pub fn with_options(mut self, options: HandleOptions) -> Self {
        self.options = options;
        self
    }

    pub fn model(&self) -> &DenoiserModel {
        &self.model
    }

    pub fn options(&self) -> HandleOptions {
        self.options
    }

    fn run(&self, x: &Image, keep_trace: bool) -> Result<(Image, Option<Trace>), DenoiserError> {
        if x.check_finite().is_err() {
            return Err(DenoiserError::NonFiniteInput);
        }
        let (h, w) = x.dims();
        let mut act = x.as_slice().to_vec();
        let mut masks = Vec::new();
        let mut kink = false;
        for (i, layer) in self.model.layers.iter().enumerate() {
            let mut pre = conv(layer, &act, h, w, true);
            if pre.iter().any(|v| !v.is_finite()) {
                return Err(DenoiserError::NonFinite { layer: i });
            }
            match layer.spec.activation {
                Activation::Relu => {
                    if keep_trace {
                        kink |= pre.contains(&0.0);
                        masks.push(Some(pre.iter().map(|&v| v > 0.0).collect()));
                    }
                    pre.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                Activation::None => {
                    if keep_trace {
                        masks.push(None);
                    }
                }
            }
            act = pre;
        }
        let skip = self.options.residual_skip;
        let s: Vec<f64> = if skip {
            x.as_slice().iter().zip(&act).map(|(a, r)| a - r).collect()
        } else {
            act
        };
        let trace = keep_trace.then(|| {
            kink |= s.contains(&0.0);
            Trace {
                masks,
                out_mask: s.iter().map(|&v| v > 0.0).collect(),
                kink,
            }
        });
        let out = Image::from_vec(h, w, s.into_iter().map(|v| v.max(0.0)).collect()).expect("same dims");
        Ok((out, trace))
    }
}

impl Denoiser for DenoiserHandle {
    fn denoise(&self, x: &Image) -> Result<Image, DenoiserError> {
        Ok(self.run(x, false)?.0)
    }
}

struct CnnLinearization<'a> {
    handle: &'a DenoiserHandle,
    trace: Trace,
    dims: (usize, usize),
}

impl CnnLinearization<'_> {
    fn check(&self, v: &Image) -> Result<(), DenoiserError> {
        if v.dims() != self.dims {
            return Err(DenoiserError::DimMismatch {
                expected: self.dims,
                actual: v.dims(),
            });
        }
        Ok(())
    }
}

impl Linearization for CnnLinearization<'_> {
    fn jvp(&self, v: &Image) -> Result<Image, DenoiserError> {
        self.check(v)?;
        let (h, w) = self.dims;
        let mut t = v.as_slice().to_vec();
        for (layer, mask) in self.handle.model.layers.iter().zip(&self.trace.masks) {
            t = conv(layer, &t, h, w, false);
            if let Some(m) = mask {
                t.iter_mut().zip(m).for_each(|(a, &keep)| {
                    if !keep {
                        *a = 0.0
                    }
                });
            }
        }
        let skip = self.handle.options.residual_skip;
        let out = v
            .as_slice()
            .iter()
            .zip(&t)
            .zip(&self.trace.out_mask)
            .map(|((a, r), &keep)| {
                let s = if skip { a - r } else { *r };
                if keep {
                    s
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Image::from_vec(h, w, out).expect("same dims"))
    }

    fn vjp(&self, u: &Image) -> Result<Image, DenoiserError> {
        self.check(u)?;
        let (h, w) = self.dims;
        let g: Vec<f64> = u
            .as_slice()
            .iter()
            .zip(&self.trace.out_mask)
            .map(|(a, &keep)| if keep { *a } else { 0.0 })
            .collect();
        let skip = self.handle.options.residual_skip;
        let mut t = if skip {
            g.iter().map(|v| -v).collect()
        } else {
            g.clone()
        };
        for (layer, mask) in self.handle.model.layers.iter().zip(&self.trace.masks).rev() {
            if let Some(m) = mask {
                t.iter_mut().zip(m).for_each(|(a, &keep)| {
                    if !keep {
                        *a = 0.0
                    }
                });
            }
            t = conv_transpose(layer, &t, h, w);
        }
        if skip {
            t.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok(Image::from_vec(h, w, t).expect("same dims"))
    }

    fn at_kink(&self) -> bool {
        self.trace.kink
    }
}

impl Differentiable for DenoiserHandle {
    fn linearize<'a>(&'a self, x: &Image) -> Result<Box<dyn Linearization + 'a>, DenoiserError> {
        let (_, trace) = self.run(x, true)?;
        Ok(Box::new(CnnLinearization {
            handle: self,
            trace: trace.expect("trace requested"),
            dims: x.dims(),
        }))
    }
}
