import * as fs from "fs";
import Papa from "papaparse";

/** Raised when an input CSV lacks a column the plot needs. */
export class MissingColumnError extends Error {
  constructor(
    public readonly column: string,
    public readonly file: string,
  ) {
    super(`missing column '${column}' in ${file}`);
    this.name = "MissingColumnError";
  }
}

export interface MetricsTable {
  file: string;
  columns: string[];
  rows: Record<string, string | number | null>[];
}

/** Parse one metrics CSV with a header row; numbers become numbers. */
export function readCsv(file: string): MetricsTable {
  const text = fs.readFileSync(file, "utf8");
  const parsed = Papa.parse<Record<string, string | number | null>>(text, {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new Error(`${file}: ${e.message} (row ${e.row})`);
  }
  return {
    file,
    columns: parsed.meta.fields ?? [],
    rows: parsed.data,
  };
}

export function requireColumns(table: MetricsTable, needed: string[]): void {
  for (const col of needed) {
    if (!table.columns.includes(col)) {
      throw new MissingColumnError(col, table.file);
    }
  }
}
