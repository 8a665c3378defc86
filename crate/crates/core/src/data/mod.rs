//! Smart-meter data model: demand and temperature series, outage records,
//! CSV ingestion/export, feeder aggregation and dataset partitioning.

mod io;
mod outage;
mod partition;
mod series;

pub use io::{
    ingest_meter_csv, ingest_meter_files, read_outages_csv, read_temperature_csv,
    write_meter_csv, write_outages_csv, write_temperature_csv,
};
pub use outage::{OutageCase, OutageRecord};
pub use partition::{cell_of, partition, DatasetPartition, DayType, HolidayCalendar, Season};
pub use series::{aggregate_feeder, DemandSeries, Flag, TemperatureSeries, KWH_TO_KW, STEP_MINUTES};
