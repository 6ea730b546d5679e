//! The butterfly encoder against an explicit generator matrix
//! `G = F^{⊗n} · B_N` built by Kronecker products over GF(2).

use polarbf::crc::Crc;
use polarbf::polar::{encode, CodeConfig};

fn kron(a: &[Vec<u8>], b: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![0u8; ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] & b[k][l];
                }
            }
        }
    }
    out
}

fn generator(n: usize) -> Vec<Vec<u8>> {
    let f = vec![vec![1, 0], vec![1, 1]];
    let mut g = vec![vec![1u8]];
    while g.len() < n {
        g = kron(&g, &f);
    }
    // Right-multiplying by the bit-reversal permutation matrix reorders columns.
    let bits = n.trailing_zeros();
    let rev = |j: usize| if bits == 0 { j } else { j.reverse_bits() >> (usize::BITS - bits) };
    g.iter()
        .map(|row| (0..n).map(|j| row[rev(j)]).collect())
        .collect()
}

fn mat_encode(u: &[u8], g: &[Vec<u8>]) -> Vec<u8> {
    let n = g.len();
    (0..n)
        .map(|j| (0..n).fold(0u8, |acc, i| acc ^ (u[i] & g[i][j])))
        .collect()
}

#[test]
fn butterfly_matches_matrix_exhaustively() {
    for n in [2usize, 4, 8, 16] {
        let g = generator(n);
        let cfg = CodeConfig::from_info_set(n, &(0..n).collect::<Vec<_>>(), Crc::NONE).unwrap();
        for word in 0u32..(1 << n) {
            let u: Vec<u8> = (0..n).map(|i| ((word >> i) & 1) as u8).collect();
            assert_eq!(
                encode(&u, &cfg).unwrap().bits(),
                mat_encode(&u, &g).as_slice(),
                "N = {n}, u = {u:?}"
            );
        }
    }
}

#[test]
fn generator_rows_of_small_codes() {
    // G_4 = F⊗F with columns bit-reversed.
    assert_eq!(
        generator(4),
        vec![vec![1, 0, 0, 0], vec![1, 0, 1, 0], vec![1, 1, 0, 0], vec![1, 1, 1, 1]]
    );
}
