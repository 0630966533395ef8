//! Systematic encoding from the reduced row echelon form of H over GF(2).

/// Parity positions are the pivot columns of the RREF of H; the remaining
/// columns carry the information bits in increasing column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    n: usize,
    info_cols: Vec<usize>,
    /// `(pivot column, mask over info_cols)`; each parity bit is the XOR of
    /// the info bits selected by its mask.
    parity: Vec<(usize, Vec<u64>)>,
}

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn get(row: &[u64], i: usize) -> bool {
    row[i / 64] >> (i % 64) & 1 == 1
}

impl Encoder {
    pub fn new(n: usize, rows: &[Vec<usize>]) -> Self {
        let w = words(n);
        let mut dense: Vec<Vec<u64>> = rows
            .iter()
            .map(|row| {
                let mut bits = vec![0u64; w];
                for &v in row {
                    bits[v / 64] ^= 1 << (v % 64);
                }
                bits
            })
            .collect();

        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let Some(p) = (rank..dense.len()).find(|&r| get(&dense[r], col)) else {
                continue;
            };
            dense.swap(rank, p);
            let pivot_row = dense[rank].clone();
            for (r, row) in dense.iter_mut().enumerate() {
                if r != rank && get(row, col) {
                    row.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push(col);
            rank += 1;
        }

        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&p| is_pivot[p] = true);
        let info_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = info_cols.len();
        let parity = pivots
            .iter()
            .zip(&dense)
            .map(|(&p, row)| {
                let mut mask = vec![0u64; words(k)];
                for (i, &c) in info_cols.iter().enumerate() {
                    if get(row, c) {
                        mask[i / 64] |= 1 << (i % 64);
                    }
                }
                (p, mask)
            })
            .collect();
        Self {
            n,
            info_cols,
            parity,
        }
    }

    pub fn k_info(&self) -> usize {
        self.info_cols.len()
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        assert_eq!(info.len(), self.k_info(), "information length");
        let mut packed = vec![0u64; words(info.len())];
        for (i, &b) in info.iter().enumerate() {
            packed[i / 64] |= u64::from(b & 1) << (i % 64);
        }
        let mut cw = vec![0u8; self.n];
        for (&c, &b) in self.info_cols.iter().zip(info) {
            cw[c] = b & 1;
        }
        for (p, mask) in &self.parity {
            let ones: u32 = mask.iter().zip(&packed).map(|(m, x)| (m & x).count_ones()).sum();
            cw[*p] = (ones & 1) as u8;
        }
        cw
    }

    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_cols.iter().map(|&c| codeword[c]).collect()
    }
}
