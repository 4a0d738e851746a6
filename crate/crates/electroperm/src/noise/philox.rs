//! Philox 4x32-10 counter-based generator with a Box-Muller normal transform.
//!
//! Counter-based generation gives random access into the stream: the draw for
//! (trajectory, mode, fine-step) is a pure function of the key and counter, so
//! trajectories can run in any order, on any worker, and produce identical
//! noise. The counter layout used here is
//! `[fine_step_lo, fine_step_hi, mode, trajectory]` with the 64-bit seed as
//! the key.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Ten-round Philox 4x32 block function.
pub fn philox4x32(mut ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (mut k0, mut k1) = (key[0], key[1]);
    for _ in 0..10 {
        let (hi0, lo0) = mulhilo(M0, ctr[0]);
        let (hi1, lo1) = mulhilo(M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0];
        k0 = k0.wrapping_add(W0);
        k1 = k1.wrapping_add(W1);
    }
    ctr
}

/// Uniform in (0, 1] built from 53 bits of two 32-bit words.
#[inline]
fn to_unit(hi: u32, lo: u32) -> f64 {
    let bits = ((hi as u64) << 32 | lo as u64) >> 11;
    (bits + 1) as f64 * (1.0 / 9007199254740992.0) // 2^-53
}

/// Standard normal draw for one counter/key pair (Box-Muller, cosine branch).
pub fn standard_normal(ctr: [u32; 4], key: [u32; 2]) -> f64 {
    let r = philox4x32(ctr, key);
    let u1 = to_unit(r[0], r[1]);
    let u2 = to_unit(r[2], r[3]);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
