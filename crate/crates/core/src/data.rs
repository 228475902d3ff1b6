//! In-memory images, masks and client datasets.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Label value excluded from the loss and from the metrics.
pub const IGNORE_INDEX: u8 = 255;

/// RGB image in [0, 1], channel-major (3, H, W).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::Dimension(format!(
                "a {height}x{width} RGB image needs {} values, got {}",
                3 * height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let plane = height * width;
        let mut data = Vec::with_capacity(3 * plane);
        for v in rgb {
            data.extend(std::iter::repeat_n(v, plane));
        }
        Self { height, width, data }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.plane()..(c + 1) * self.plane()]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    pub fn pixel(&self, i: usize) -> [f64; 3] {
        let p = self.plane();
        [self.data[i], self.data[p + i], self.data[2 * p + i]]
    }

    pub fn set_pixel(&mut self, i: usize, rgb: [f64; 3]) {
        let p = self.plane();
        self.data[i] = rgb[0];
        self.data[p + i] = rgb[1];
        self.data[2 * p + i] = rgb[2];
    }

    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for c in 0..3 {
            for y in 0..self.height {
                let row = &mut out.channel_mut(c)[y * self.width..(y + 1) * self.width];
                row.reverse();
            }
        }
        out
    }
}

/// Per-pixel class ids, `IGNORE_INDEX` for unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "a {height}x{width} mask needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.width) {
            row.reverse();
        }
        out
    }
}

/// One client's local data. `domains[i]` names the domain image `i` was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub images: Vec<Image>,
    pub masks: Vec<Mask>,
    pub domains: Vec<usize>,
}

impl ClientDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Argument(format!("client {} has no images", self.client_id)));
        }
        if self.masks.len() != self.images.len() || self.domains.len() != self.images.len() {
            return Err(Error::Consistency(format!(
                "client {}: {} images, {} masks, {} domain tags",
                self.client_id,
                self.images.len(),
                self.masks.len(),
                self.domains.len()
            )));
        }
        for (img, mask) in self.images.iter().zip(&self.masks) {
            if img.height != mask.height || img.width != mask.width {
                return Err(Error::Dimension("image and mask sizes differ".into()));
            }
            if let Some(bad) = mask
                .data
                .iter()
                .find(|&&v| v != IGNORE_INDEX && v as usize >= num_classes)
            {
                return Err(Error::Consistency(format!(
                    "client {}: label {bad} outside [0, {num_classes})",
                    self.client_id
                )));
            }
        }
        Ok(())
    }

    /// Distinct domains present, ascending.
    pub fn domain_set(&self) -> Vec<usize> {
        let mut d = self.domains.clone();
        d.sort_unstable();
        d.dedup();
        d
    }
}

/// Images stacked as (B, 3, H, W) with labels (B, H, W) flattened.
#[derive(Debug, Clone)]
pub struct Batch {
    pub images: Tensor4,
    pub labels: Vec<u8>,
}

impl Batch {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Image, &'a Mask)>) -> Result<Self> {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut dims: Option<(usize, usize)> = None;
        let mut count = 0;
        for (img, mask) in pairs {
            let d = (img.height, img.width);
            if *dims.get_or_insert(d) != d || (mask.height, mask.width) != d {
                return Err(Error::Dimension("images in a batch must share one size".into()));
            }
            data.extend_from_slice(&img.data);
            labels.extend_from_slice(&mask.data);
            count += 1;
        }
        let (h, w) = dims.ok_or_else(|| Error::Argument("empty batch".into()))?;
        Ok(Self {
            images: Tensor4::from_vec([count, 3, h, w], data)?,
            labels,
        })
    }

    pub fn images_only<'a>(images: impl IntoIterator<Item = &'a Image>) -> Result<Tensor4> {
        let mut data = Vec::new();
        let mut dims: Option<(usize, usize)> = None;
        let mut count = 0;
        for img in images {
            let d = (img.height, img.width);
            if *dims.get_or_insert(d) != d {
                return Err(Error::Dimension("images in a batch must share one size".into()));
            }
            data.extend_from_slice(&img.data);
            count += 1;
        }
        let (h, w) = dims.ok_or_else(|| Error::Argument("empty batch".into()))?;
        Tensor4::from_vec([count, 3, h, w], data)
    }

    pub fn len(&self) -> usize {
        self.images.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
