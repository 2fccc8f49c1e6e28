/**
 * Imported before anything else: the protocol owns stdout, so any library
 * that logs through console.log/info is rerouted to stderr.
 */

console.log = console.error;
console.info = console.error;

export {};
