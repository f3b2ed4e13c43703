from smrkit.cli import main

main()
