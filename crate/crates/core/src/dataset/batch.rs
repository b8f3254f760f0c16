//! Mini-batch iteration over any labeled sample collection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{IqDataset, TensorDataset};
use crate::tensor::Tensor;

/// Random access to fixed-shape labeled samples.
pub trait SampleSource {
    fn sample_shape(&self) -> Vec<usize>;
    fn len(&self) -> usize;
    fn class_names(&self) -> &[String];
    fn label(&self, i: usize) -> usize;
    fn snr_centi_db(&self, i: usize) -> i32;
    /// Write sample `i` into `out` (length = product of `sample_shape`).
    fn write_sample(&self, i: usize, out: &mut [f32]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn n_classes(&self) -> usize {
        self.class_names().len()
    }
}

impl SampleSource for IqDataset {
    fn sample_shape(&self) -> Vec<usize> {
        vec![2, self.n_samples]
    }

    fn len(&self) -> usize {
        self.frames.len()
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn label(&self, i: usize) -> usize {
        self.frames[i].label as usize
    }

    fn snr_centi_db(&self, i: usize) -> i32 {
        self.frames[i].snr_centi_db
    }

    fn write_sample(&self, i: usize, out: &mut [f32]) {
        let f = &self.frames[i];
        let (a, b) = out.split_at_mut(self.n_samples);
        a.copy_from_slice(&f.i);
        b.copy_from_slice(&f.q);
    }
}

impl SampleSource for TensorDataset {
    fn sample_shape(&self) -> Vec<usize> {
        self.sample_shape.clone()
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    fn snr_centi_db(&self, i: usize) -> i32 {
        self.snr_centi_db[i]
    }

    fn write_sample(&self, i: usize, out: &mut [f32]) {
        out.copy_from_slice(self.sample(i));
    }
}

/// One mini-batch: stacked samples `[B, ...sample_shape]` plus metadata.
#[derive(Clone, Debug)]
pub struct Batch {
    pub x: Tensor<f32>,
    pub labels: Vec<usize>,
    pub snr_centi_db: Vec<i32>,
    /// Positions of the samples in the source.
    pub indices: Vec<usize>,
}

pub struct Batches<'a, S: SampleSource + ?Sized> {
    source: &'a S,
    order: Vec<usize>,
    batch_size: usize,
    next: usize,
}

/// Visit every sample exactly once in batches of `batch_size` (the last may
/// be short). With a seed the order is a seeded permutation; without one it
/// is the stored order.
pub fn batches<S: SampleSource + ?Sized>(source: &S, batch_size: usize, shuffle_seed: Option<u64>) -> Batches<'_, S> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut order: Vec<usize> = (0..source.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Batches { source, order, batch_size, next: 0 }
}

impl<S: SampleSource + ?Sized> Batches<'_, S> {
    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl<S: SampleSource + ?Sized> Iterator for Batches<'_, S> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.next >= self.order.len() {
            return None;
        }
        let end = (self.next + self.batch_size).min(self.order.len());
        let indices = self.order[self.next..end].to_vec();
        self.next = end;
        let shape = self.source.sample_shape();
        let per: usize = shape.iter().product();
        let mut data = vec![0.0f32; per * indices.len()];
        for (chunk, &i) in data.chunks_exact_mut(per).zip(&indices) {
            self.source.write_sample(i, chunk);
        }
        let mut full = vec![indices.len()];
        full.extend(shape);
        Some(Batch {
            x: Tensor::new(&full, data).expect("batch shape"),
            labels: indices.iter().map(|&i| self.source.label(i)).collect(),
            snr_centi_db: indices.iter().map(|&i| self.source.snr_centi_db(i)).collect(),
            indices,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SignalFrame;

    fn toy(n: usize) -> IqDataset {
        let mut ds = IqDataset::new(vec!["a".into(), "b".into()], 2);
        for k in 0..n {
            let v = k as f32;
            ds.push(SignalFrame::new(vec![v, v + 0.5], vec![-v, -v - 0.5], (k % 2) as u16, 0, k as u64).unwrap()).unwrap();
        }
        ds
    }

    #[test]
    fn batch_counts() {
        let ds = toy(1600);
        let sizes: Vec<usize> = ds.batches(128, None).map(|b| b.labels.len()).collect();
        assert_eq!(sizes.len(), 13);
        assert!(sizes[..12].iter().all(|&s| s == 128));
        assert_eq!(sizes[12], 64);
    }

    #[test]
    fn batch_tensor_rows_are_i_then_q() {
        let ds = toy(3);
        let b = ds.batches(3, None).next().unwrap();
        assert_eq!(b.x.shape(), &[3, 2, 2]);
        assert_eq!(b.x.get(&[2, 0, 1]), 2.5);
        assert_eq!(b.x.get(&[2, 1, 0]), -2.0);
    }

    #[test]
    fn shuffle_is_seeded_and_complete() {
        let ds = toy(50);
        let a: Vec<usize> = ds.batches(7, Some(3)).flat_map(|b| b.indices).collect();
        let b: Vec<usize> = ds.batches(7, Some(3)).flat_map(|b| b.indices).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(a, (0..50).collect::<Vec<_>>());
    }
}
