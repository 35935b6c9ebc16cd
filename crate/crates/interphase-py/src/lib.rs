use pyo3::prelude::*;

#[pymodule]
fn interphase_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
