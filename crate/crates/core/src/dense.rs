//! Strided complex matrix products on raw column-major buffers.

use matrixmultiply::CGemmOption;

use crate::operator::C64;

/// Read-only strided matrix view.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [C64],
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl<'a> MatRef<'a> {
    /// Contiguous column-major `rows × cols` matrix starting at `data[0]`.
    pub fn col_major(data: &'a [C64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Self {
            data,
            rows,
            cols,
            rs: 1,
            cs: rows as isize,
        }
    }

    fn max_offset(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        ((self.rows - 1) as isize * self.rs + (self.cols - 1) as isize * self.cs) as usize
    }
}

pub(crate) struct MatMut<'a> {
    pub data: &'a mut [C64],
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl<'a> MatMut<'a> {
    pub fn col_major(data: &'a mut [C64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Self {
            data,
            rows,
            cols,
            rs: 1,
            cs: rows as isize,
        }
    }
}

/// c ← alpha·a·b + beta·c
pub(crate) fn gemm(alpha: C64, a: MatRef<'_>, b: MatRef<'_>, beta: C64, c: MatMut<'_>) {
    assert_eq!(a.cols, b.rows, "inner dimensions");
    assert_eq!(a.rows, c.rows, "row count");
    assert_eq!(b.cols, c.cols, "column count");
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    assert!(a.rs >= 0 && a.cs >= 0 && b.rs >= 0 && b.cs >= 0 && c.rs >= 0 && c.cs >= 0);
    assert!(a.max_offset() < a.data.len() || a.rows * a.cols == 0);
    assert!(b.max_offset() < b.data.len() || b.rows * b.cols == 0);
    let c_max = ((c.rows - 1) as isize * c.rs + (c.cols - 1) as isize * c.cs) as usize;
    assert!(c_max < c.data.len());
    // SAFETY: every view was bounds-checked above against its slice, strides are
    // non-negative, and `c` is uniquely borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            a.rows,
            a.cols,
            b.cols,
            [alpha.re, alpha.im],
            a.data.as_ptr() as *const [f64; 2],
            a.rs,
            a.cs,
            b.data.as_ptr() as *const [f64; 2],
            b.rs,
            b.cs,
            [beta.re, beta.im],
            c.data.as_mut_ptr() as *mut [f64; 2],
            c.rs,
            c.cs,
        );
    }
}
