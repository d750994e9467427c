mod common;

use common::checks;

#[test]
fn sql_average_rating_is_four_and_a_half() {
    checks::sql_pipeline_average().unwrap();
}

#[test]
fn store_survives_write_attempts() {
    checks::store_read_only(100).unwrap();
}
