try {
    reader.close();
} catch (IOException e) {
    log.warn("close failed", e);
}
