//! The parameter set of the encoder-decoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::labels::EvidenceKind;
use crate::sketch::Edge;

/// Per-kind evidence encoder `f(x) = tanh((Wh[x] + bh) · Wd + bd)` plus the
/// kind's noise scale, stored as `log σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindEncoder {
    pub wh: Tensor,
    pub bh: Tensor,
    pub wd: Tensor,
    pub bd: Tensor,
    pub log_sigma: Tensor,
}

/// Recurrent weights of one edge kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDecoder {
    pub wh: Tensor,
    pub bh: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wy: Tensor,
    pub by: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shapes {
    /// Evidence vocabulary sizes, indexed by `EvidenceKind`.
    pub vocab: [usize; 3],
    pub enc_units: [usize; 3],
    pub latent: usize,
    pub hidden: usize,
    pub symbols: usize,
    /// Whether the decoder's initial state also reads the label encoding.
    pub conditioned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GedParams {
    pub enc: [KindEncoder; 3],
    pub dec: [EdgeDecoder; 2],
    pub wl: Tensor,
    pub bl: Tensor,
    /// Label-conditioning weights of the initial decoder state.
    pub wx: Option<Tensor>,
}

impl GedParams {
    /// Glorot-initialised weights, zero biases, unit σ. The conditioning
    /// matrix is drawn last so that the remaining tensors do not depend on
    /// whether it exists.
    pub fn init<R: Rng + ?Sized>(s: &Shapes, rng: &mut R) -> Self {
        let enc = EvidenceKind::ALL.map(|k| {
            let (v, h) = (s.vocab[k.index()], s.enc_units[k.index()]);
            KindEncoder {
                wh: Tensor::glorot(v, h, rng),
                bh: Tensor::vector(h),
                wd: Tensor::glorot(h, s.latent, rng),
                bd: Tensor::vector(s.latent),
                log_sigma: Tensor::scalar(0.0),
            }
        });
        let dec = [Edge::Child, Edge::Sibling].map(|_| EdgeDecoder {
            wh: Tensor::glorot(s.hidden, s.hidden, rng),
            bh: Tensor::vector(s.hidden),
            wv: Tensor::glorot(s.symbols, s.hidden, rng),
            bv: Tensor::vector(s.hidden),
            wy: Tensor::glorot(s.hidden, s.symbols, rng),
            by: Tensor::vector(s.symbols),
        });
        let wl = Tensor::glorot(s.latent, s.hidden, rng);
        let bl = Tensor::vector(s.hidden);
        let wx = s.conditioned.then(|| Tensor::glorot(s.latent, s.hidden, rng));
        GedParams { enc, dec, wl, bl, wx }
    }

    pub fn shapes(&self) -> Shapes {
        Shapes {
            vocab: self.enc.each_ref().map(|e| e.wh.rows),
            enc_units: self.enc.each_ref().map(|e| e.wh.cols),
            latent: self.wl.rows,
            hidden: self.wl.cols,
            symbols: self.dec[0].wv.rows,
            conditioned: self.wx.is_some(),
        }
    }

    /// A tensor set of the same shape filled with zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, t| t.fill(0.0));
        z
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for k in EvidenceKind::ALL {
            let e = &self.enc[k.index()];
            let n = k.name();
            out.push((format!("enc.{n}.wh"), &e.wh));
            out.push((format!("enc.{n}.bh"), &e.bh));
            out.push((format!("enc.{n}.wd"), &e.wd));
            out.push((format!("enc.{n}.bd"), &e.bd));
            out.push((format!("enc.{n}.log_sigma"), &e.log_sigma));
        }
        for (d, n) in self.dec.iter().zip(["child", "sibling"]) {
            out.push((format!("dec.{n}.wh"), &d.wh));
            out.push((format!("dec.{n}.bh"), &d.bh));
            out.push((format!("dec.{n}.wv"), &d.wv));
            out.push((format!("dec.{n}.bv"), &d.bv));
            out.push((format!("dec.{n}.wy"), &d.wy));
            out.push((format!("dec.{n}.by"), &d.by));
        }
        out.push(("dec.wl".into(), &self.wl));
        out.push(("dec.bl".into(), &self.bl));
        if let Some(wx) = &self.wx {
            out.push(("dec.wx".into(), wx));
        }
        out
    }

    /// Every tensor, mutably, in the order of [`GedParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for e in &mut self.enc {
            out.extend([&mut e.wh, &mut e.bh, &mut e.wd, &mut e.bd, &mut e.log_sigma]);
        }
        for d in &mut self.dec {
            out.extend([&mut d.wh, &mut d.bh, &mut d.wv, &mut d.bv, &mut d.wy, &mut d.by]);
        }
        out.extend([&mut self.wl, &mut self.bl]);
        out.extend(self.wx.as_mut());
        out
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, &mut Tensor)) {
        for (i, t) in self.tensors_mut().into_iter().enumerate() {
            f(i, t);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.data.len()).sum()
    }
}
