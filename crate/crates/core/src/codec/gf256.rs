//! Arithmetic in GF(2^8) with the primitive polynomial x^8+x^4+x^3+x^2+1
//! (0x11d) and generator 2.

const POLY: u16 = 0x11d;

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

const fn build_tables() -> Tables {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    // Second copy so that exp[log a + log b] needs no reduction.
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    Tables { exp, log }
}

static TABLES: Tables = build_tables();

#[inline]
pub fn add(a: u8, b: u8) -> u8 {
    a ^ b
}

#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    let l = TABLES.log[a as usize] as usize + TABLES.log[b as usize] as usize;
    TABLES.exp[l]
}

/// Multiplicative inverse. Panics on zero.
#[inline]
pub fn inv(a: u8) -> u8 {
    assert!(a != 0, "zero has no inverse in GF(256)");
    TABLES.exp[255 - TABLES.log[a as usize] as usize]
}

/// `dst[i] ^= c * src[i]` over whole slices.
pub fn mul_add_into(dst: &mut [u8], c: u8, src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    if c == 0 {
        return;
    }
    if c == 1 {
        for (d, s) in dst.iter_mut().zip(src) {
            *d ^= *s;
        }
        return;
    }
    let lc = TABLES.log[c as usize] as usize;
    for (d, s) in dst.iter_mut().zip(src) {
        if *s != 0 {
            *d ^= TABLES.exp[lc + TABLES.log[*s as usize] as usize];
        }
    }
}

/// Inverts a square matrix in place by Gauss-Jordan elimination.
/// Returns `None` when the matrix is singular.
pub fn invert(mut m: Vec<Vec<u8>>) -> Option<Vec<Vec<u8>>> {
    let size = m.len();
    let mut out: Vec<Vec<u8>> = (0..size)
        .map(|i| {
            let mut row = vec![0u8; size];
            row[i] = 1;
            row
        })
        .collect();
    for col in 0..size {
        let pivot = (col..size).find(|&r| m[r][col] != 0)?;
        m.swap(col, pivot);
        out.swap(col, pivot);
        let scale = inv(m[col][col]);
        for j in 0..size {
            m[col][j] = mul(m[col][j], scale);
            out[col][j] = mul(out[col][j], scale);
        }
        for r in 0..size {
            if r != col && m[r][col] != 0 {
                let factor = m[r][col];
                let (pivot_m, pivot_out) = (m[col].clone(), out[col].clone());
                mul_add_into(&mut m[r], factor, &pivot_m);
                mul_add_into(&mut out[r], factor, &pivot_out);
            }
        }
    }
    Some(out)
}
