//! Network definitions: CONV-5 over raw I/Q and a compact residual image
//! network over transformed inputs.

mod build;
mod checkpoint;
mod spec;

pub use build::{
    build_conv5, build_ct_image_cnn, build_image_cnn, conv5_spec, ct_image_cnn_spec, image_cnn_spec, Init, Model,
    CONV5_DEFAULT_WIDTHS, PAPER_CONV5_PARAMS,
};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use spec::{LayerSpec, ModelSpec, ParamShape, Projection};

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::argmax;

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax(&[0.1, 2.3, -1.0]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 1.0, 1.0]), 1);
        assert_eq!(argmax(&[1.1f32, 3.3, 0.0].map(|v| v + 7.0)), 1);
    }
}
