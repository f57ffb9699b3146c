from svenlab.harness import main

main()
