use serde::{Deserialize, Serialize};

use super::mode;
use crate::error::{Error, Result};
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolStrategy {
    /// Cell-wise mean over imputations; discrete columns take the cell-wise
    /// mode so codes stay valid.
    #[default]
    Mean,
}

/// Combines completed tables cell by cell. Cells observed in the source data
/// are copied from the first table.
pub fn pool_imputations(tables: &[Table], strategy: PoolStrategy) -> Result<Table> {
    let PoolStrategy::Mean = strategy;
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidParam("no imputations to pool".into()))?;
    for t in &tables[1..] {
        let same = t.n_rows() == first.n_rows()
            && t.n_columns() == first.n_columns()
            && t.columns().iter().zip(first.columns()).all(|(a, b)| {
                a.meta.name == b.meta.name && a.meta.kind == b.meta.kind && a.imputed == b.imputed && a.observed == b.observed
            });
        if !same {
            return Err(Error::ShapeMismatch("imputations differ in shape or provenance".into()));
        }
    }
    if tables.len() == 1 {
        return Ok(first.clone());
    }
    let mut columns = first.columns().to_vec();
    for (j, c) in columns.iter_mut().enumerate() {
        for i in 0..c.values.len() {
            if !c.imputed[i] {
                continue;
            }
            let cells = tables.iter().map(|t| t.columns()[j].values[i]);
            c.values[i] = if c.meta.kind.is_discrete() {
                mode(cells)
            } else {
                cells.sum::<f64>() / tables.len() as f64
            };
        }
    }
    Table::new(columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Column, ColumnMeta, Kind};

    fn imputed(v: f64) -> Table {
        let mut c = Column::complete(ColumnMeta::new("a", Kind::Continuous), vec![1.0, v]);
        c.imputed[1] = true;
        Table::new(vec![c]).unwrap()
    }

    #[test]
    fn mean_of_imputed_cells() {
        let p = pool_imputations(&[imputed(10.0), imputed(20.0)], PoolStrategy::Mean).unwrap();
        assert_eq!(p.columns()[0].values, vec![1.0, 15.0]);
        assert_eq!(pool_imputations(&[imputed(3.0)], PoolStrategy::Mean).unwrap(), imputed(3.0));
    }

    #[test]
    fn shape_mismatch() {
        let other = Table::new(vec![Column::complete(ColumnMeta::new("b", Kind::Continuous), vec![1.0, 2.0])]).unwrap();
        assert!(pool_imputations(&[imputed(1.0), other], PoolStrategy::Mean).is_err());
        assert!(pool_imputations(&[], PoolStrategy::Mean).is_err());
    }
}
