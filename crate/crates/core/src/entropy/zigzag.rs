use crate::codec::QuantizedBlock;

/// Natural-order index of each zig-zag position.
pub const ZIGZAG_ORDER: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, //
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21, 28, //
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, //
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// Block coefficients ordered from low to high frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZigzagVector(pub [i16; 64]);

pub fn zigzag(block: &QuantizedBlock) -> ZigzagVector {
    ZigzagVector(ZIGZAG_ORDER.map(|i| block.0[i]))
}

pub fn inverse_zigzag(vector: &ZigzagVector) -> QuantizedBlock {
    let mut out = [0i16; 64];
    for (k, &i) in ZIGZAG_ORDER.iter().enumerate() {
        out[i] = vector.0[k];
    }
    QuantizedBlock(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Walks anti-diagonals, alternating direction, to build the scan order
    /// independently of the lookup table.
    fn walked_order() -> Vec<usize> {
        let mut order = Vec::with_capacity(64);
        for s in 0..15usize {
            let cells: Vec<(usize, usize)> =
                (0..=s).filter(|&r| r < 8 && s - r < 8).map(|r| (r, s - r)).collect();
            if s % 2 == 0 {
                // even diagonals run bottom-left to top-right
                order.extend(cells.iter().rev().map(|&(r, c)| r * 8 + c));
            } else {
                order.extend(cells.iter().map(|&(r, c)| r * 8 + c));
            }
        }
        order
    }

    #[test]
    fn table_matches_diagonal_walk() {
        assert_eq!(walked_order(), ZIGZAG_ORDER.to_vec());
    }

    #[test]
    fn low_frequencies_first() {
        let mut b = QuantizedBlock::default();
        b.0[0] = 5;
        b.0[1] = 3;
        b.0[8] = 2;
        let v = zigzag(&b);
        assert_eq!(&v.0[..4], &[5, 3, 2, 0]);
        assert!(v.0[3..].iter().all(|&x| x == 0));
        assert_eq!(inverse_zigzag(&v), b);
        assert_eq!(zigzag(&QuantizedBlock::default()), ZigzagVector([0; 64]));
        assert_eq!(inverse_zigzag(&ZigzagVector([0; 64])), QuantizedBlock::default());
    }

    proptest! {
        #[test]
        fn permutation_round_trip(vals in prop::collection::vec(any::<i16>(), 64)) {
            let mut b = QuantizedBlock::default();
            b.0.copy_from_slice(&vals);
            prop_assert_eq!(inverse_zigzag(&zigzag(&b)), b);
        }
    }
}
