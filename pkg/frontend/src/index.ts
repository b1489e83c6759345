export {
  BoxArray,
  BoxRow,
  boxArrayFromRows,
  boxCount,
  emptyBoxArray,
  rowAt,
  validateBoxArray,
} from "./boxes.js";
export {
  CURVE_CSV_HEADER,
  CurvePoint,
  GtBox,
  PseudoLabels,
  TargetSets,
  annotationsToJson,
  cornersToXywh,
  detectionsToJson,
  exactExtent,
  parseCurveCsv,
  parseDetectionsJson,
  parsePseudoLabelsJson,
  parseTargetSetsJson,
} from "./coco.js";
export { CliError, CliResult, cliPath, runCli, withTempDir } from "./cli.js";
export {
  Curve,
  DetectionSource,
  DsatState,
  DsatUpdate,
  GridSpec,
  KeptDetections,
  NmsUncOptions,
  PrCurveOptions,
  StandardNmsOptions,
  TargetSetOptions,
  ThresholdChoice,
  buildTargetSets,
  defaultDsatState,
  dsatMaybeUpdate,
  emaUpdate,
  nmsUnc,
  prCurve,
  selectThreshold,
  standardNms,
} from "./ops.js";
