use std::collections::BTreeMap;

use super::batchnorm;
use super::conv::Conv2d;
use super::upsample::Upsample;
use crate::error::{Error, Result};
use crate::model::{bn_affine_name, bn_stat_name, conv_name, ModelConfig, ModelState, HEAD_BIAS, HEAD_WEIGHT};
use crate::tensor::Tensor4;

pub type Gradients = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-layer (mean, variance) observed on one batch.
pub type LayerStats = Vec<(Vec<f64>, Vec<f64>)>;

#[derive(Debug)]
struct StageCache {
    cols: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    /// Post-ReLU activation, also the next stage's input.
    out: Vec<f64>,
}

/// Activations retained by a train-mode forward pass.
#[derive(Debug)]
pub struct ForwardCache {
    version: u64,
    mode: Mode,
    batch: usize,
    stages: Vec<StageCache>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }
}

/// conv3x3(3→w0)+BN+ReLU, conv3x3/2(w0→w1)+BN+ReLU, conv3x3/2(w1→w2)+BN+ReLU,
/// conv3x3(w2→w3)+BN+ReLU, then a 1x1 classifier and bilinear x4 upsampling.
///
/// The classifier runs before the upsampling; both are linear and bilinear
/// weights sum to one, so this equals classifying the upsampled features.
#[derive(Debug, Clone)]
pub struct SegNet {
    config: ModelConfig,
    convs: [Conv2d; 4],
    head: Conv2d,
    upsample: Upsample,
    /// Spatial size at the input of each stage, then at the head.
    sizes: [(usize, usize); 5],
}

impl SegNet {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let convs = config
            .conv_stages()
            .map(|(cin, cout, kernel, stride)| Conv2d { cin, cout, kernel, stride });
        let mut sizes = [(config.height, config.width); 5];
        for i in 0..4 {
            let (h, w) = sizes[i];
            sizes[i + 1] = convs[i].out_size(h, w);
        }
        let (hh, hw) = sizes[4];
        Ok(Self {
            config: config.clone(),
            convs,
            head: Conv2d {
                cin: config.widths[3],
                cout: config.num_classes,
                kernel: 1,
                stride: 1,
            },
            upsample: Upsample::new(hh, hw, 4),
            sizes,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn check_input(&self, images: &Tensor4) -> Result<()> {
        let [_, c, h, w] = images.shape();
        if c != 3 || h != self.config.height || w != self.config.width {
            return Err(Error::Dimension(format!(
                "expected (B,3,{},{}) images, got {:?}",
                self.config.height,
                self.config.width,
                images.shape()
            )));
        }
        if !images.is_finite() {
            return Err(Error::Numeric("input images contain non-finite values".into()));
        }
        Ok(())
    }

    fn run(
        &self,
        model: &ModelState,
        images: &Tensor4,
        batch_stats: bool,
        keep: bool,
    ) -> Result<(Tensor4, Vec<StageCache>, LayerStats)> {
        let b = images.batch();
        let mut x = images.data().to_vec();
        let mut caches = Vec::with_capacity(4);
        let mut stats = Vec::with_capacity(4);
        for (i, conv) in self.convs.iter().enumerate() {
            let (h, w) = self.sizes[i];
            let (ho, wo) = self.sizes[i + 1];
            let plane = ho * wo;
            let (mut y, cols) = conv.forward(&x, b, h, w, model.group(&conv_name(i))?);
            let affine = model.group(&bn_affine_name(i))?;
            let (mean, var) = if batch_stats {
                batchnorm::channel_stats(&y, b, conv.cout, plane)
            } else {
                let s = model.group(&bn_stat_name(i))?;
                (s[..conv.cout].to_vec(), s[conv.cout..].to_vec())
            };
            let (xhat, inv_std) = batchnorm::normalize(
                &mut y,
                b,
                conv.cout,
                plane,
                &mean,
                &var,
                affine,
                self.config.bn_eps,
                keep,
            );
            y.iter_mut().for_each(|v| *v = v.max(0.0));
            stats.push((mean, var));
            if keep {
                caches.push(StageCache {
                    cols,
                    xhat,
                    inv_std,
                    out: y.clone(),
                });
            }
            x = y;
        }
        let (hh, hw) = self.sizes[4];
        let (mut z, _) = self.head.forward(&x, b, hh, hw, model.group(HEAD_WEIGHT)?);
        let bias = model.group(HEAD_BIAS)?;
        let c = self.config.num_classes;
        for (i, chunk) in z.chunks_mut(hh * hw).enumerate() {
            let bv = bias[i % c];
            chunk.iter_mut().for_each(|v| *v += bv);
        }
        let logits = self.upsample.forward(&z, b * c);
        let logits = Tensor4::from_vec([b, c, self.config.height, self.config.width], logits)?;
        if !logits.is_finite() {
            return Err(Error::Numeric("logits are not finite".into()));
        }
        Ok((logits, caches, stats))
    }

    /// Train mode normalizes with batch statistics and folds them into the
    /// running statistics; eval mode uses the stored running statistics and
    /// leaves the model untouched.
    pub fn forward(&self, model: &mut ModelState, images: &Tensor4, mode: Mode) -> Result<(Tensor4, ForwardCache)> {
        self.check_input(images)?;
        match mode {
            Mode::Eval => {
                let logits = self.predict(model, images)?;
                Ok((
                    logits,
                    ForwardCache {
                        version: model.version(),
                        mode,
                        batch: images.batch(),
                        stages: Vec::new(),
                    },
                ))
            }
            Mode::Train => {
                if images.batch() < 2 {
                    return Err(Error::Argument("train-mode forward needs at least 2 images".into()));
                }
                let (logits, stages, stats) = self.run(model, images, true, true)?;
                for (i, (mean, var)) in stats.iter().enumerate() {
                    let stat = model
                        .get_mut(&bn_stat_name(i))
                        .ok_or_else(|| Error::Consistency(format!("missing {}", bn_stat_name(i))))?;
                    batchnorm::update_running(stat, mean, var, self.config.bn_momentum);
                }
                Ok((
                    logits,
                    ForwardCache {
                        version: model.version(),
                        mode,
                        batch: images.batch(),
                        stages,
                    },
                ))
            }
        }
    }

    /// Pure eval-mode forward.
    pub fn predict(&self, model: &ModelState, images: &Tensor4) -> Result<Tensor4> {
        self.check_input(images)?;
        Ok(self.run(model, images, false, false)?.0)
    }

    /// Per-layer batch statistics as a train-mode pass would compute them,
    /// without touching the stored running statistics.
    pub fn batch_statistics(&self, model: &ModelState, images: &Tensor4) -> Result<LayerStats> {
        self.check_input(images)?;
        Ok(self.run(model, images, true, false)?.2)
    }

    /// Gradients of every weight and BN-affine group. Running statistics get none.
    pub fn backward(&self, model: &ModelState, cache: &ForwardCache, dlogits: &Tensor4) -> Result<Gradients> {
        if cache.mode != Mode::Train {
            return Err(Error::Argument("backward needs a train-mode forward cache".into()));
        }
        if cache.version != model.version() {
            return Err(Error::Stale {
                cache: cache.version,
                model: model.version(),
            });
        }
        let b = cache.batch;
        let c = self.config.num_classes;
        if dlogits.shape() != [b, c, self.config.height, self.config.width] {
            return Err(Error::Dimension(format!(
                "loss gradient shape {:?} does not match logits",
                dlogits.shape()
            )));
        }
        let mut grads = Gradients::new();
        let mut dz = self.upsample.backward(dlogits.data(), b * c);
        let (hh, hw) = self.sizes[4];
        let mut dbias = vec![0.0; c];
        for (i, chunk) in dz.chunks(hh * hw).enumerate() {
            dbias[i % c] += chunk.iter().sum::<f64>();
        }
        grads.insert(HEAD_BIAS.to_string(), dbias);
        let feat = &cache.stages[3].out;
        let (dw, dx) = self
            .head
            .backward(&dz, &[], feat, b, hh, hw, model.group(HEAD_WEIGHT)?, true);
        grads.insert(HEAD_WEIGHT.to_string(), dw);
        dz = dx.expect("requested");
        for i in (0..4).rev() {
            let conv = &self.convs[i];
            let st = &cache.stages[i];
            let (ho, wo) = self.sizes[i + 1];
            for (g, o) in dz.iter_mut().zip(&st.out) {
                if *o <= 0.0 {
                    *g = 0.0;
                }
            }
            let (dy, daff) = batchnorm::backward(
                &dz,
                &st.xhat,
                &st.inv_std,
                model.group(&bn_affine_name(i))?,
                b,
                conv.cout,
                ho * wo,
            );
            grads.insert(bn_affine_name(i), daff);
            let (h, w) = self.sizes[i];
            let (dw, dx) = conv.backward(&dy, &st.cols, &[], b, h, w, model.group(&conv_name(i))?, i > 0);
            grads.insert(conv_name(i), dw);
            if let Some(dx) = dx {
                dz = dx;
            }
        }
        Ok(grads)
    }
}
