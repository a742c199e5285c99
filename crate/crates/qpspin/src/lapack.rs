//! Minimal FFI onto the system LAPACK (shipped inside OpenBLAS).
//!
//! Only three drivers are needed: full symmetric eigenvalues (one-stage
//! and two-stage, values only) and the tridiagonal solver used by the
//! Lanczos code. The two-stage driver reduces via banded form and is
//! several times faster than `dsyev` for the 2^N-dimensional tables the
//! dense engine feeds it; it only supports `jobz = 'N'`, which is all the
//! pressure path needs.

use crate::{Error, Result};

extern "C" {
    fn dsyev_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn dsyev_2stage_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn dstev_(
        jobz: *const u8,
        n: *const i32,
        d: *mut f64,
        e: *mut f64,
        z: *mut f64,
        ldz: *const i32,
        work: *mut f64,
        info: *mut i32,
    );
}

/// Size above which the two-stage reduction wins over `dsyev`.
const TWO_STAGE_THRESHOLD: usize = 1 << 11;

/// Eigenvalues of a symmetric matrix, ascending. Consumes the matrix
/// buffer (dense, size `n * n`, symmetric so the storage order is
/// irrelevant).
pub(crate) fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let two_stage = n >= TWO_STAGE_THRESHOLD;
    let routine: &'static str = if two_stage { "dsyev_2stage" } else { "dsyev" };
    let (jobz, uplo) = (b'N', b'L');
    let nn = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;

    let mut query = [0.0f64];
    let neg1 = -1i32;
    unsafe {
        if two_stage {
            dsyev_2stage_(
                &jobz,
                &uplo,
                &nn,
                a.as_mut_ptr(),
                &nn,
                w.as_mut_ptr(),
                query.as_mut_ptr(),
                &neg1,
                &mut info,
            );
        } else {
            dsyev_(
                &jobz,
                &uplo,
                &nn,
                a.as_mut_ptr(),
                &nn,
                w.as_mut_ptr(),
                query.as_mut_ptr(),
                &neg1,
                &mut info,
            );
        }
    }
    if info != 0 {
        return Err(Error::Lapack { routine, info });
    }
    let lwork = query[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        if two_stage {
            dsyev_2stage_(
                &jobz,
                &uplo,
                &nn,
                a.as_mut_ptr(),
                &nn,
                w.as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                &mut info,
            );
        } else {
            dsyev_(
                &jobz,
                &uplo,
                &nn,
                a.as_mut_ptr(),
                &nn,
                w.as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                &mut info,
            );
        }
    }
    if info != 0 {
        return Err(Error::Lapack { routine, info });
    }
    Ok(w)
}

/// Eigendecomposition of a symmetric tridiagonal matrix.
///
/// Returns ascending eigenvalues and the eigenvector matrix in
/// column-major order (`z[i + k*n]` = component `i` of eigenvector `k`).
pub(crate) fn tridiagonal_eigh(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()));
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let jobz = b'V';
    let nn = n as i32;
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0f64; n * n];
    let mut work = vec![0.0f64; (2 * n).max(1)];
    let mut info = 0i32;
    unsafe {
        dstev_(
            &jobz,
            &nn,
            d.as_mut_ptr(),
            e.as_mut_ptr(),
            z.as_mut_ptr(),
            &nn,
            work.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dstev",
            info,
        });
    }
    Ok((d, z))
}
