// Placeholder; populated by the acceptance suite below.
int main() { return 1; }
