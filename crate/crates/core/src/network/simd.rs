//! Elementwise kernels for the batched engine, compiled twice: a portable
//! baseline and an AVX2+FMA variant selected at runtime.

use std::f64::consts::LN_2;

const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;

/// `exp(x)` for `|x| ≤ 40`, accurate to a few ulp.
#[inline(always)]
fn madd<const FMA: bool>(a: f64, b: f64, c: f64) -> f64 {
    if FMA {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

#[inline(always)]
fn exp_bounded<const FMA: bool>(x: f64) -> f64 {
    // Round-to-nearest via the 1.5·2^52 shifter so the loop stays vectorizable.
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let shifted = x * (1.0 / LN_2) + SHIFTER;
    let k = shifted - SHIFTER;
    let r = x - k * LN2_HI - k * LN2_LO;
    // Taylor series to degree 12 on |r| ≤ ln2/2
    let mut p = 1.0 / 479_001_600.0;
    p = madd::<FMA>(p, r, 1.0 / 39_916_800.0);
    p = madd::<FMA>(p, r, 1.0 / 3_628_800.0);
    p = madd::<FMA>(p, r, 1.0 / 362_880.0);
    p = madd::<FMA>(p, r, 1.0 / 40_320.0);
    p = madd::<FMA>(p, r, 1.0 / 5_040.0);
    p = madd::<FMA>(p, r, 1.0 / 720.0);
    p = madd::<FMA>(p, r, 1.0 / 120.0);
    p = madd::<FMA>(p, r, 1.0 / 24.0);
    p = madd::<FMA>(p, r, 1.0 / 6.0);
    p = madd::<FMA>(p, r, 0.5);
    p = madd::<FMA>(p, r, 1.0);
    p = madd::<FMA>(p, r, 1.0);
    let ki = shifted.to_bits().wrapping_sub(SHIFTER.to_bits());
    let scale = f64::from_bits(ki.wrapping_add(1023) << 52);
    p * scale
}

#[inline(always)]
fn tanh_fast<const FMA: bool>(z: f64) -> f64 {
    let zc = z.max(-20.0).min(20.0);
    1.0 - 2.0 / (exp_bounded::<FMA>(2.0 * zc) + 1.0)
}

#[inline(always)]
fn tanh_slice_impl<const FMA: bool>(z: &[f64], out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(z) {
        *o = tanh_fast::<FMA>(v);
    }
}

/// Forward jet rules for one row. `z`/`h` hold the row's value block and the
/// optional derivative blocks.
pub(super) struct RowBlocks<'a> {
    pub z_val: &'a [f64],
    pub z_dx: Option<&'a [f64]>,
    pub z_dt: Option<&'a [f64]>,
    pub z_dxx: Option<&'a [f64]>,
}

#[inline(always)]
fn activate_row_impl<const FMA: bool>(z: &RowBlocks<'_>, h: &mut [f64], n: usize, bx: Option<usize>, bt: Option<usize>, bxx: Option<usize>) {
    let (a, rest) = h.split_at_mut(n);
    tanh_slice_impl::<FMA>(z.z_val, a);
    let a: &[f64] = a;
    if let (Some(b), Some(zx)) = (bx, z.z_dx) {
        let hx = &mut rest[(b - 1) * n..b * n];
        for ((o, &ai), &zi) in hx.iter_mut().zip(a).zip(zx) {
            *o = (1.0 - ai * ai) * zi;
        }
    }
    if let (Some(b), Some(zt)) = (bt, z.z_dt) {
        let ht = &mut rest[(b - 1) * n..b * n];
        for ((o, &ai), &zi) in ht.iter_mut().zip(a).zip(zt) {
            *o = (1.0 - ai * ai) * zi;
        }
    }
    if let (Some(b), Some(zx), Some(zxx)) = (bxx, z.z_dx, z.z_dxx) {
        let hxx = &mut rest[(b - 1) * n..b * n];
        for (((o, &ai), &zxi), &zxxi) in hxx.iter_mut().zip(a).zip(zx).zip(zxx) {
            let s1 = 1.0 - ai * ai;
            let s2 = -2.0 * ai * s1;
            *o = s2 * zxi * zxi + s1 * zxxi;
        }
    }
}

/// Pullback of the jet rules for one row: `g` is the adjoint of `h`,
/// written into `out` as the adjoint of `z`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn backward_row_impl(
    a: &[f64],
    z: &[f64],
    g: &[f64],
    out: &mut [f64],
    n: usize,
    bx: Option<usize>,
    bt: Option<usize>,
    bxx: Option<usize>,
) {
    let (ov, orest) = out.split_at_mut(n);
    for ((o, &ai), &gi) in ov.iter_mut().zip(a).zip(&g[..n]) {
        *o = gi * (1.0 - ai * ai);
    }
    if let Some(b) = bx {
        let zx = &z[b * n..(b + 1) * n];
        let gx = &g[b * n..(b + 1) * n];
        for (((o, &ai), &zi), &gi) in ov.iter_mut().zip(a).zip(zx).zip(gx) {
            let s1 = 1.0 - ai * ai;
            *o += gi * (-2.0 * ai * s1) * zi;
        }
        let ox = &mut orest[(b - 1) * n..b * n];
        for ((o, &ai), &gi) in ox.iter_mut().zip(a).zip(gx) {
            *o = gi * (1.0 - ai * ai);
        }
    }
    if let Some(b) = bt {
        let zt = &z[b * n..(b + 1) * n];
        let gt = &g[b * n..(b + 1) * n];
        for (((o, &ai), &zi), &gi) in ov.iter_mut().zip(a).zip(zt).zip(gt) {
            let s1 = 1.0 - ai * ai;
            *o += gi * (-2.0 * ai * s1) * zi;
        }
        let ot = &mut orest[(b - 1) * n..b * n];
        for ((o, &ai), &gi) in ot.iter_mut().zip(a).zip(gt) {
            *o = gi * (1.0 - ai * ai);
        }
    }
    if let (Some(b), Some(bxi)) = (bxx, bx) {
        let zx = &z[bxi * n..(bxi + 1) * n];
        let zxx = &z[b * n..(b + 1) * n];
        let gxx = &g[b * n..(b + 1) * n];
        for ((((o, &ai), &zxi), &zxxi), &gi) in ov.iter_mut().zip(a).zip(zx).zip(zxx).zip(gxx) {
            let s1 = 1.0 - ai * ai;
            let s2 = -2.0 * ai * s1;
            let s3 = -2.0 * (s1 * s1 + ai * s2);
            *o += gi * (s3 * zxi * zxi + s2 * zxxi);
        }
        {
            let ox = &mut orest[(bxi - 1) * n..bxi * n];
            for (((o, &ai), &zxi), &gi) in ox.iter_mut().zip(a).zip(zx).zip(gxx) {
                let s1 = 1.0 - ai * ai;
                *o += 2.0 * gi * (-2.0 * ai * s1) * zxi;
            }
        }
        let oxx = &mut orest[(b - 1) * n..b * n];
        for ((o, &ai), &gi) in oxx.iter_mut().zip(a).zip(gxx) {
            *o = gi * (1.0 - ai * ai);
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use super::*;

    #[target_feature(enable = "avx2,fma")]
    pub unsafe fn activate_row(z: &RowBlocks<'_>, h: &mut [f64], n: usize, bx: Option<usize>, bt: Option<usize>, bxx: Option<usize>) {
        activate_row_impl::<true>(z, h, n, bx, bt, bxx)
    }

    #[target_feature(enable = "avx2,fma")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn backward_row(
        a: &[f64],
        z: &[f64],
        g: &[f64],
        out: &mut [f64],
        n: usize,
        bx: Option<usize>,
        bt: Option<usize>,
        bxx: Option<usize>,
    ) {
        backward_row_impl(a, z, g, out, n, bx, bt, bxx)
    }
}

#[cfg(target_arch = "x86_64")]
fn has_avx2() -> bool {
    use std::sync::OnceLock;
    static HAS: OnceLock<bool> = OnceLock::new();
    *HAS.get_or_init(|| is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma"))
}

pub(super) fn activate_row(z: &RowBlocks<'_>, h: &mut [f64], n: usize, bx: Option<usize>, bt: Option<usize>, bxx: Option<usize>) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports the enabled features.
        return unsafe { avx2::activate_row(z, h, n, bx, bt, bxx) };
    }
    activate_row_impl::<false>(z, h, n, bx, bt, bxx)
}

#[allow(clippy::too_many_arguments)]
pub(super) fn backward_row(
    a: &[f64],
    z: &[f64],
    g: &[f64],
    out: &mut [f64],
    n: usize,
    bx: Option<usize>,
    bt: Option<usize>,
    bxx: Option<usize>,
) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports the enabled features.
        return unsafe { avx2::backward_row(a, z, g, out, n, bx, bt, bxx) };
    }
    backward_row_impl(a, z, g, out, n, bx, bt, bxx)
}
