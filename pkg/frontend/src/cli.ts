/**
 * Subprocess plumbing for the labelsieve CLI. The binary is looked up on
 * PATH unless LABELSIEVE_CLI points at it explicitly.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export class CliError extends Error {
  readonly exitCode: number;
  /** Stderr of the failed process, verbatim. */
  readonly stderr: string;

  constructor(args: readonly string[], exitCode: number, stderr: string) {
    const detail = stderr.trim();
    super(
      `labelsieve ${args[0] ?? ""} exited with code ${exitCode}` +
        (detail ? `: ${detail}` : ""),
    );
    this.name = "CliError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

export function cliPath(): string {
  return process.env["LABELSIEVE_CLI"] || "labelsieve";
}

export interface CliResult {
  stdout: string;
  stderr: string;
}

/** Run one subcommand to completion; non-zero exit becomes a CliError. */
export function runCli(args: readonly string[]): CliResult {
  const bin = cliPath();
  const proc = spawnSync(bin, args, {
    encoding: "utf8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    const code = (proc.error as NodeJS.ErrnoException).code;
    if (code === "ENOENT") {
      throw new Error(
        `labelsieve CLI not found at "${bin}"; install the backend package or set LABELSIEVE_CLI`,
      );
    }
    throw proc.error;
  }
  if (proc.status !== 0) {
    throw new CliError(args, proc.status ?? -1, proc.stderr ?? "");
  }
  return { stdout: proc.stdout ?? "", stderr: proc.stderr ?? "" };
}

/** Make a scratch directory, hand it to fn, and always clean it up. */
export function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "labelsieve-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
