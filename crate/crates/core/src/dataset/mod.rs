//! In-memory datasets, their on-disk containers, and batch iteration.

mod batch;
mod container;
mod tensor_set;

use std::collections::HashSet;

pub use batch::{batches, Batch, Batches, SampleSource};
pub use container::{
    decode_container, encode_container, read_container, write_container, ContainerHeader,
    CONTAINER_MAGIC, CONTAINER_VERSION, HEADER_LEN,
};
pub use tensor_set::{
    decode_tensor_container, encode_tensor_container, read_tensor_container,
    write_tensor_container, TensorDataset, TENSOR_MAGIC,
};

use crate::error::{Error, Result};
use crate::signal::SignalFrame;

/// Labeled I/Q frames of a common length.
#[derive(Clone, Debug, PartialEq)]
pub struct IqDataset {
    pub class_names: Vec<String>,
    pub n_samples: usize,
    pub frames: Vec<SignalFrame>,
}

/// Disjoint train and test sets.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub train: IqDataset,
    pub test: IqDataset,
}

impl IqDataset {
    pub fn new(class_names: Vec<String>, n_samples: usize) -> Self {
        Self { class_names, n_samples, frames: Vec::new() }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    fn check_frame(&self, index: usize, f: &SignalFrame) -> Result<()> {
        if f.label as usize >= self.n_classes() {
            return Err(Error::invalid(format!(
                "frame {index}: label {} is outside {} classes",
                f.label,
                self.n_classes()
            )));
        }
        if f.i.len() != self.n_samples || f.q.len() != self.n_samples {
            return Err(Error::shape(format!(
                "frame {index}: {}/{} I/Q samples, dataset expects {}",
                f.i.len(),
                f.q.len(),
                self.n_samples
            )));
        }
        Ok(())
    }

    pub fn push(&mut self, frame: SignalFrame) -> Result<()> {
        self.check_frame(self.frames.len(), &frame)?;
        self.frames.push(frame);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.frames.iter().enumerate().try_for_each(|(i, f)| self.check_frame(i, f))
    }

    /// Frames at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<IqDataset> {
        let mut out = IqDataset::new(self.class_names.clone(), self.n_samples);
        for &i in indices {
            let f = self.frames.get(i).ok_or_else(|| {
                Error::invalid(format!("index {i} out of range for {} frames", self.len()))
            })?;
            out.frames.push(f.clone());
        }
        Ok(out)
    }

    /// Iterate `[B,2,N]` batches; see [`batches`].
    pub fn batches(&self, batch_size: usize, shuffle_seed: Option<u64>) -> Batches<'_, Self> {
        batches(self, batch_size, shuffle_seed)
    }
}

/// Partition `ds` by two disjoint index sets.
pub fn split(ds: &IqDataset, train_idx: &[usize], test_idx: &[usize]) -> Result<(IqDataset, IqDataset)> {
    let train: HashSet<usize> = train_idx.iter().copied().collect();
    if let Some(dup) = test_idx.iter().find(|i| train.contains(i)) {
        return Err(Error::invalid(format!("index {dup} appears in both train and test splits")));
    }
    Ok((ds.subset(train_idx)?, ds.subset(test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> IqDataset {
        let mut ds = IqDataset::new(vec!["a".into(), "b".into()], 4);
        for k in 0..n {
            let v = k as f32;
            ds.push(SignalFrame::new(vec![v; 4], vec![-v; 4], (k % 2) as u16, 0, k as u64).unwrap()).unwrap();
        }
        ds
    }

    #[test]
    fn push_validates_geometry() {
        let mut ds = toy(0);
        assert!(ds.push(SignalFrame::new(vec![0.0; 3], vec![0.0; 3], 0, 0, 0).unwrap()).is_err());
        assert!(ds.push(SignalFrame::new(vec![0.0; 4], vec![0.0; 4], 2, 0, 0).unwrap()).is_err());
    }

    #[test]
    fn split_rejects_overlap() {
        let ds = toy(5);
        let err = split(&ds, &[1, 2], &[2, 3]).unwrap_err();
        assert!(err.to_string().contains("index 2"));
        let (a, b) = split(&ds, &[0, 1], &[3, 4]).unwrap();
        assert_eq!(a.frames[1].seed, 1);
        assert_eq!(b.frames[0].seed, 3);
        assert!(split(&ds, &[0], &[9]).is_err());
    }
}
